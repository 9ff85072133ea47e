#pragma once

// Plain comma-separated files: no quoting, '.' decimal point, 9 significant
// digits on output. Undefined numbers are written as NA.

#include <istream>
#include <ostream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "estrocon/error.hpp"
#include "estrocon/ode.hpp"
#include "estrocon/ocp.hpp"
#include "estrocon/sensitivity.hpp"

namespace estrocon::csv {

std::string number(double v);
std::string number(const std::optional<double>& v);

std::vector<std::string_view> split(std::string_view line);

/// Strict double parse of a whole field; ParseError carries `line`.
double parse_double(std::string_view field, std::size_t line, std::string_view column);
std::optional<double> parse_optional(std::string_view field, std::size_t line, std::string_view column);

/// Reads the header line and checks it equals `expected`.
void expect_header(std::istream& in, std::string_view expected);

/// Calls row(fields, line_number) for each non-empty data line after the
/// header, checking the field count first.
template <class Row>
void for_each_row(std::istream& in, std::size_t columns, Row&& row) {
  std::string text;
  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    const auto fields = split(text);
    if (fields.size() != columns) {
      throw ParseError(fmt::format("line {}: expected {} fields, got {}", line, columns, fields.size()), line);
    }
    row(fields, line);
  }
}

inline constexpr std::string_view kTrajectoryHeader = "t,S,R,E,F,u";
inline constexpr std::string_view kOcpReportHeader = "iter,J,s,rel_err";
inline constexpr std::string_view kPrccHeader = "param,output,day,prcc,n_effective";

inline constexpr std::string_view kBasicTrajectoryHeader = "t,T,E,F";
inline constexpr std::string_view kKeyValueHeader = "name,value";

void write_trajectory(std::ostream& out, const ode::Trajectory<4>& traj);
ode::Trajectory<4> read_trajectory(std::istream& in);  // slopes are left empty

struct OcpReportRow {
  std::size_t iter = 0;
  double J = 0.0;
  double s = 0.0;
  double rel_err = 0.0;
};
void write_basic_trajectory(std::ostream& out, const ode::Trajectory<3>& traj);
ode::Trajectory<3> read_basic_trajectory(std::istream& in);

using KeyValues = std::vector<std::pair<std::string, double>>;
void write_key_values(std::ostream& out, const KeyValues& values);
KeyValues read_key_values(std::istream& in);

void write_ocp_report(std::ostream& out, const FbsReport& report);
std::vector<OcpReportRow> read_ocp_report(std::istream& in);

void write_prcc(std::ostream& out, const PrccReport& report);
std::vector<PrccCell> read_prcc(std::istream& in);

/// Opens a file for writing or throws IoError.
void write_file(const std::string& path, const std::string& contents);

}  // namespace estrocon::csv
