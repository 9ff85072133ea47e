#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace estrocon {

enum class Diet { CD, HFD };

std::string_view to_string(Diet diet);
/// Accepts "CD" or "HFD"; throws ValidationError otherwise.
Diet parse_diet(std::string_view text);

/// Rate constants and thresholds shared by the basic and the extended model.
/// Defaults are the calibrated/assumed values of the mouse study; a2, a3 and
/// k3 default to the Scenario I settings since the study varies them.
struct ModelParams {
  double k1 = 0.586967;     // tumor growth rate, 1/day
  double a1 = 59.0927;      // half-maximum estrogen threshold, pg/g
  double m1 = 1.0 / 2000.0; // inverse tumor carrying capacity, 1/mm^3
  double mu = 5.94;         // estrogen washout rate, 1/day
  double r = 20.8391;       // estrogen production rate, pg/g/mm^3/day
  double alpha = 2.21427e-5;// fat consumption rate, 1/day/mm^3
  double k2 = 0.045;        // fat growth rate, 1/day
  double m2 = 0.002711;     // inverse fat carrying capacity, 1/mm^3
  double k3 = 0.586967 / 2; // resistant-cell growth rate, 1/day
  double c = 1.0;           // maximum death rate, 1/day
  double l = 10.0;          // Hill coefficient
  double a2 = 20.0;         // estrogen threshold for sensitive-cell death, pg/g
  double a3 = 1.0;          // estrogen threshold for conversion to resistant, pg/g
  double eta = 1.0;         // competition intensity
  double p = 1.0;           // constant treatment factor in (0, 1]

  /// Every invariant violation, empty when the set is valid.
  std::vector<std::string> violations() const;
  /// Non-fatal oddities (currently only the degenerate a3 == 0 threshold).
  std::vector<std::string> warnings() const;
  /// Throws ValidationError listing all violations.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

/// Diet-specific initial conditions. The basic model reads T0, the extended
/// model reads S0 and R0.
struct DietInit {
  Diet diet = Diet::CD;
  double T0 = 1.0;
  double S0 = 1.0;
  double R0 = 0.0;
  double E0 = 175.143;
  double F0 = 49.923;

  /// Tabulated calibration output for the diet.
  static DietInit table(Diet diet);
  /// E0 from the table and F0 = mu * E0 / r, so that dE/dt(0) = 0 exactly.
  static DietInit steady_state(Diet diet, const ModelParams& params);

  std::vector<std::string> violations() const;
};

struct StateBasic {
  double T = 0.0;
  double E = 0.0;
  double F = 0.0;

  std::array<double, 3> to_array() const { return {T, E, F}; }
  static StateBasic from_array(const std::array<double, 3>& y) { return {y[0], y[1], y[2]}; }
  bool operator==(const StateBasic&) const = default;
};

struct StateExtended {
  double S = 0.0;
  double R = 0.0;
  double E = 0.0;
  double F = 0.0;

  std::array<double, 4> to_array() const { return {S, R, E, F}; }
  static StateExtended from_array(const std::array<double, 4>& y) {
    return {y[0], y[1], y[2], y[3]};
  }
  bool operator==(const StateExtended&) const = default;
};

struct AdipocyteGeometry {
  double n = 0.0;  // adipocytes per mm^2
  double d = 0.1;  // adipocyte diameter, mm
  double V = 0.0;  // tissue cube volume, mm^3
};

// Saturating response c * a^l / (a^l + E^l), evaluated as c / (1 + (E/a)^l).
// a == 0 is the degenerate threshold: c at E == 0, zero otherwise.
double hill_term(double E, double a, double c, double l);
// d/dE of hill_term.
double hill_term_derivative(double E, double a, double c, double l);

// Michaelis-Menten growth factor k1 * E / (a1 + E) and its E-derivative.
double growth_factor(double E, double k1, double a1);
double growth_factor_derivative(double E, double k1, double a1);

/// Time derivatives of the basic tumor/estrogen/fat model.
StateBasic rhs_basic(const StateBasic& state, const ModelParams& params);

/// Time derivatives of the sensitive/resistant model with estrogen production
/// scaled by (1 - u). Constant treatment with factor p is u = 1 - p.
StateExtended rhs_extended(const StateExtended& state, const ModelParams& params, double u);

/// Control value equivalent to the constant treatment factor p.
inline double control_from_factor(double p) { return 1.0 - p; }

/// n * V^(2/3) / d. The quantity is a cell count by construction although it
/// is used as the fat amount of the cube; the value is returned as is.
double fat_volume_estimate(const AdipocyteGeometry& geom);

struct CapacityCheck {
  bool feasible = false;
  double threshold = 0.0;  // alpha / (m1 * eta)
  double margin = 0.0;     // k2 - threshold
};

/// Fat growth feasibility condition k2 >= alpha / (m1 * eta).
CapacityCheck carrying_capacity_check(const ModelParams& params);

/// Components in [-tolerance, 0) are clamped to 0 after integration steps.
inline constexpr double kClampTolerance = 1e-10;

/// Step guard for the integrator enforcing non-negative states. Returns false
/// (reject the step) when a component is below -tolerance; otherwise clamps
/// small negative rounding to exactly zero. Optionally records the most
/// negative pre-clamp value over accepted steps.
struct NonNegativeGuard {
  double tolerance = kClampTolerance;
  double* min_seen = nullptr;

  template <std::size_t N>
  bool operator()(std::array<double, N>& y) const {
    for (double v : y) {
      if (!(v >= -tolerance)) return false;
    }
    for (double& v : y) {
      if (min_seen != nullptr && v < *min_seen) *min_seen = v;
      if (v < 0.0) v = 0.0;
    }
    return true;
  }
};

}  // namespace estrocon
