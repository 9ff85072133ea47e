#pragma once

#include <string>
#include <vector>

namespace estrocon {

/// Control u(t) sampled on a uniform grid, with box bounds. Values between
/// nodes are linearly interpolated.
struct ControlGrid {
  std::vector<double> times;
  std::vector<double> values;
  double lower = 0.0;
  double upper = 0.99;

  /// Grid of `count` nodes on [t0, t1] filled with `value`.
  static ControlGrid constant(double t0, double t1, std::size_t count, double value, double lower = 0.0,
                              double upper = 0.99);

  double at(double t) const;
  std::vector<std::string> violations() const;
};

}  // namespace estrocon
