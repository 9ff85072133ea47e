#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "estrocon/model.hpp"
#include "estrocon/ocp.hpp"

namespace estrocon::cli {

enum class Command { Simulate, Calibrate, Treat, Ocp, Prcc, Fatvol };

std::string_view to_string(Command c);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitIo = 4;

/// Fully merged run configuration. Precedence: command-line flag, then the
/// config file, then these defaults.
struct RunConfig {
  Command command = Command::Simulate;
  std::string diet = "CD";
  std::string scenario = "I-a";
  std::string plan = "none";
  std::string model = "basic";  // simulate: basic | extended
  OcpWeights weights;
  double t_f = 25.0;
  double u_lower = 0.0;
  double u_upper = 0.99;
  std::size_t grid_nodes = 2001;
  std::size_t max_iterations = 500;
  double output_step = 0.01;
  std::optional<double> rtol;
  std::optional<double> atol;
  std::uint64_t seed = 7;
  unsigned threads = 1;
  std::size_t samples = 1000;  // prcc design size
  std::vector<double> days{5.0, 15.0, 25.0};
  std::string data = "data/synthetic_table1.csv";
  std::string out = "out";
  std::optional<std::string> label;
  std::optional<std::string> config_file;
  // fatvol
  double fat_n = 0.0;
  double fat_d = 0.1;
  double fat_V = 0.0;

  std::vector<std::string> violations() const;
};

/// Thrown for usage problems (unknown command, bad flag); maps to exit 2.
class UsageError : public std::runtime_error {
public:
  UsageError(std::string message, int code) : std::runtime_error(std::move(message)), exit_code(code) {}
  int exit_code;
};

/// Parses argv-style arguments (without the program name). Throws
/// UsageError, or ValidationError listing every violation.
RunConfig parse_config(const std::vector<std::string>& args);

/// Executes the command, writing artifacts below
/// <out>/<command>/<label or timestamp>/ and the summary to `out`.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

/// parse_config + run with exit-code mapping.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Directory used for a run's artifacts.
std::filesystem::path output_directory(const RunConfig& config);

}  // namespace estrocon::cli
