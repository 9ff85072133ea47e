#pragma once

// Two-step least-squares calibration of the basic model.
//
// Step 1 fits (k1, a1, r_CD, r_HFD) to the tumor data with estrogen frozen at
// its steady state r/mu, where the tumor equation has a closed-form logistic
// solution. Step 2 keeps those values and fits (r, alpha) on the full model,
// started from E0 = r_diet/mu and F0 = r_diet/r.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "estrocon/model.hpp"
#include "estrocon/ode.hpp"

namespace estrocon {

enum class Quantity { Tumor, Fat };

std::string_view to_string(Quantity q);
Quantity parse_quantity(std::string_view text);

struct Measurement {
  Diet diet = Diet::CD;
  double day = 0.0;
  Quantity quantity = Quantity::Tumor;
  double value = 0.0;
  std::optional<double> spread;

  bool operator==(const Measurement&) const = default;
};

using Measurements = std::vector<Measurement>;

/// Reads `diet,day,quantity,value,spread` rows. Malformed rows raise
/// ParseError with the 1-based line number; negative values raise
/// ValidationError.
Measurements parse_measurements(std::istream& in);
Measurements load_measurements(const std::string& path);
void write_measurements(std::ostream& out, const Measurements& data);

/// r_hat / mu. Throws DomainError unless mu > 0.
double steady_state_estrogen(double r_hat, double mu);

// ------------------------------------------------------------ optimisation

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct SimplexOptions {
  std::size_t starts = 10;
  std::uint64_t seed = 20240521;
  std::size_t max_evaluations = 4000;  // per start
  double x_tolerance = 1e-10;          // simplex diameter in search coordinates
  double f_tolerance = 1e-14;          // spread of simplex values, relative
  unsigned threads = 1;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t best_start = 0;
  std::size_t evaluations = 0;
  bool converged = false;            // the winning start met its tolerances
  std::vector<bool> at_bound;        // within 1e-6 (relative) of either bound
};

/// Bounded Nelder-Mead from Latin-hypercube starting points. Coordinates with
/// a positive lower bound are searched in log space. The lowest value wins,
/// ties going to the lowest start index.
SimplexResult minimize_box(const std::function<double(const std::vector<double>&)>& f, const Box& box,
                           const SimplexOptions& options = {});

// ------------------------------------------------------------- calibration

struct Step1Bounds {
  double k1_lo = 0.01, k1_hi = 5.0;
  double a1_lo = 1.0, a1_hi = 1000.0;
  double E_lo = 150.0, E_hi = 1500.0;  // steady-state estrogen range, pg/g
};

struct Step1Result {
  double k1 = 0.0;
  double a1 = 0.0;
  double r_CD = 0.0;
  double r_HFD = 0.0;
  double residual = 0.0;
  bool converged = false;
  std::vector<std::string> at_bound;  // names of parameters on a bound
};

struct Step2Bounds {
  double r_lo = 0.1, r_hi = 100.0;
  double alpha_lo = 1e-7, alpha_hi = 1e-2;
};

struct Step2Result {
  double r = 0.0;
  double alpha = 0.0;
  double residual = 0.0;
  bool converged = false;
  std::vector<std::string> at_bound;
};

/// Fixed inputs of step 2.
struct Step2Fixed {
  double k1 = 0.0;
  double a1 = 0.0;
  double r_CD = 0.0;
  double r_HFD = 0.0;
  double m1 = 1.0 / 2000.0;
  double mu = 5.94;
};

struct CalibrationResult {
  Step1Result step1;
  Step2Result step2;
  double E0_CD = 0.0, E0_HFD = 0.0;
  double F0_CD = 0.0, F0_HFD = 0.0;

  /// Default parameters with the fitted values substituted.
  ModelParams params() const;
  DietInit init(Diet diet) const;
};

/// Closed-form logistic 1 / (m + (1/T0 - m) exp(-g t)).
double logistic(double g, double m, double T0, double t);

/// Tumor volume of the basic model at each requested day, from T0 = 1.
std::vector<double> simulate_basic_tumor(const ModelParams& params, const DietInit& init,
                                         const std::vector<double>& days, const ode::IntegratorConfig& cfg = {});

Step1Result fit_step1(const Measurements& data, double m1, double mu, const Step1Bounds& bounds = {},
                      const SimplexOptions& options = {});
Step2Result fit_step2(const Measurements& data, const Step2Fixed& fixed, const Step2Bounds& bounds = {},
                      const SimplexOptions& options = {}, const ode::IntegratorConfig& cfg = {});
CalibrationResult calibrate(const Measurements& data, double m1 = 1.0 / 2000.0, double mu = 5.94,
                            const SimplexOptions& options = {});

/// Noiseless data from the basic model: tumor at `tumor_days` and fat at
/// `fat_days` for both diets.
Measurements synthesize_measurements(const ModelParams& params, const DietInit& cd, const DietInit& hfd,
                                     const std::vector<double>& tumor_days = {10.0, 13.0, 15.0},
                                     const std::vector<double>& fat_days = {15.0});

}  // namespace estrocon
