#include "estrocon/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace estrocon::csv {

std::string number(double v) {
  if (!std::isfinite(v)) return "NA";
  return fmt::format("{:.9g}", v);
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string("NA"); }

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line, std::string_view column) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(fmt::format("line {}: cannot parse {} from '{}'", line, column, field), line);
  }
  return v;
}

std::optional<double> parse_optional(std::string_view field, std::size_t line, std::string_view column) {
  if (field.empty() || field == "NA") return std::nullopt;
  return parse_double(field, line, column);
}

void expect_header(std::istream& in, std::string_view expected) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("line 1: missing header", 1);
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  if (header != expected) {
    throw ParseError(fmt::format("line 1: expected header '{}', got '{}'", expected, header), 1);
  }
}

void write_trajectory(std::ostream& out, const ode::Trajectory<4>& traj) {
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& y = traj.states[i];
    const double u = traj.controls.empty() ? 0.0 : traj.controls[i];
    out << number(traj.times[i]) << ',' << number(y[0]) << ',' << number(y[1]) << ',' << number(y[2]) << ','
        << number(y[3]) << ',' << number(u) << '\n';
  }
}

ode::Trajectory<4> read_trajectory(std::istream& in) {
  expect_header(in, kTrajectoryHeader);
  ode::Trajectory<4> traj;
  static constexpr std::string_view cols[] = {"t", "S", "R", "E", "F", "u"};
  for_each_row(in, 6, [&](const std::vector<std::string_view>& f, std::size_t line) {
    double v[6];
    for (int k = 0; k < 6; ++k) v[k] = parse_double(f[k], line, cols[k]);
    if (!traj.empty() && !(v[0] > traj.times.back())) {
      throw ParseError(fmt::format("line {}: times must be strictly increasing", line), line);
    }
    traj.times.push_back(v[0]);
    traj.states.push_back({v[1], v[2], v[3], v[4]});
    traj.controls.push_back(v[5]);
  });
  return traj;
}

void write_basic_trajectory(std::ostream& out, const ode::Trajectory<3>& traj) {
  out << kBasicTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& y = traj.states[i];
    out << number(traj.times[i]) << ',' << number(y[0]) << ',' << number(y[1]) << ',' << number(y[2]) << '\n';
  }
}

ode::Trajectory<3> read_basic_trajectory(std::istream& in) {
  expect_header(in, kBasicTrajectoryHeader);
  ode::Trajectory<3> traj;
  static constexpr std::string_view cols[] = {"t", "T", "E", "F"};
  for_each_row(in, 4, [&](const std::vector<std::string_view>& f, std::size_t line) {
    double v[4];
    for (int k = 0; k < 4; ++k) v[k] = parse_double(f[k], line, cols[k]);
    if (!traj.empty() && !(v[0] > traj.times.back())) {
      throw ParseError(fmt::format("line {}: times must be strictly increasing", line), line);
    }
    traj.times.push_back(v[0]);
    traj.states.push_back({v[1], v[2], v[3]});
  });
  return traj;
}

void write_key_values(std::ostream& out, const KeyValues& values) {
  out << kKeyValueHeader << '\n';
  for (const auto& [name, value] : values) out << name << ',' << number(value) << '\n';
}

KeyValues read_key_values(std::istream& in) {
  expect_header(in, kKeyValueHeader);
  KeyValues out;
  for_each_row(in, 2, [&](const std::vector<std::string_view>& f, std::size_t line) {
    out.emplace_back(std::string(f[0]), parse_double(f[1], line, "value"));
  });
  return out;
}

void write_ocp_report(std::ostream& out, const FbsReport& report) {
  out << kOcpReportHeader << '\n';
  for (std::size_t i = 0; i < report.J_history.size(); ++i) {
    out << (i + 1) << ',' << number(report.J_history[i]) << ',' << number(report.s_history[i]) << ','
        << number(report.rel_error_history[i]) << '\n';
  }
}

std::vector<OcpReportRow> read_ocp_report(std::istream& in) {
  expect_header(in, kOcpReportHeader);
  std::vector<OcpReportRow> rows;
  for_each_row(in, 4, [&](const std::vector<std::string_view>& f, std::size_t line) {
    OcpReportRow r;
    r.iter = static_cast<std::size_t>(parse_double(f[0], line, "iter"));
    r.J = parse_double(f[1], line, "J");
    r.s = parse_double(f[2], line, "s");
    r.rel_err = parse_double(f[3], line, "rel_err");
    rows.push_back(r);
  });
  return rows;
}

void write_prcc(std::ostream& out, const PrccReport& report) {
  out << kPrccHeader << '\n';
  for (const auto& c : report.cells) {
    out << c.param << ',' << c.output << ',' << number(c.day) << ',' << number(c.value) << ',' << c.n_effective
        << '\n';
  }
}

std::vector<PrccCell> read_prcc(std::istream& in) {
  expect_header(in, kPrccHeader);
  std::vector<PrccCell> cells;
  for_each_row(in, 5, [&](const std::vector<std::string_view>& f, std::size_t line) {
    if (f[1].size() != 1 || std::string_view("SREF").find(f[1][0]) == std::string_view::npos) {
      throw ParseError(fmt::format("line {}: unknown output '{}'", line, f[1]), line);
    }
    PrccCell c;
    c.param = std::string(f[0]);
    c.output = f[1][0];
    c.day = parse_double(f[2], line, "day");
    c.value = parse_optional(f[3], line, "prcc");
    c.n_effective = static_cast<std::size_t>(parse_double(f[4], line, "n_effective"));
    cells.push_back(std::move(c));
  });
  return cells;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
  out << contents;
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path));
}

}  // namespace estrocon::csv
