#pragma once

// Latin-hypercube sampling and partial rank correlation coefficients.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "estrocon/model.hpp"
#include "estrocon/ode.hpp"

namespace estrocon {

struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
};

struct LhsDesign {
  std::vector<ParamRange> ranges;
  Eigen::MatrixXd samples;  // n_samples x n_params
  std::uint64_t seed = 0;
};

/// One uniform draw in each of n equal-width strata per column, with strata
/// permuted independently per column. Deterministic for a fixed seed.
LhsDesign lhs_sample(const std::vector<ParamRange>& ranges, std::size_t n, std::uint64_t seed);

/// Ranks 1..n with ties sharing their average rank.
Eigen::VectorXd rank_transform(const Eigen::VectorXd& x);

/// PRCC between column `which` of `samples` and `output`. Nothing when the
/// regression on the remaining columns is rank deficient or either residual
/// vector is constant.
std::optional<double> prcc(const Eigen::MatrixXd& samples, const Eigen::VectorXd& output, std::size_t which);

/// PRCC of every column against every output column, sharing one
/// factorisation per parameter. Result is n_params x n_outputs.
std::vector<std::vector<std::optional<double>>> prcc_matrix(const Eigen::MatrixXd& samples,
                                                            const Eigen::MatrixXd& outputs);

/// Parameter values that can be addressed by name in a design.
double get_param(const ModelParams& params, std::string_view name);
void set_param(ModelParams& params, std::string_view name, double value);

/// Sampled parameters, in report order.
const std::vector<std::string>& prcc_parameter_names();

/// Scenario baseline for the sensitivity study: a2 = a3 = 5, p = 0.5,
/// k3 = k1 / 2, other values at their defaults.
ModelParams prcc_baseline();

/// [b/2, 2b] per parameter, with p capped at 1.
std::vector<ParamRange> prcc_ranges(const ModelParams& baseline);

struct PrccCell {
  std::string param;
  char output = 'S';  // S, R, E or F
  double day = 0.0;
  std::optional<double> value;
  std::size_t n_effective = 0;
};

struct PrccFailure {
  std::size_t row = 0;
  std::string reason;
};

struct PrccReport {
  std::vector<PrccCell> cells;  // param-major, then output, then day
  ModelParams baseline;
  Diet diet = Diet::CD;
  std::vector<double> days;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::vector<PrccFailure> failures;

  const PrccCell* find(std::string_view param, char output, double day) const;
};

struct PrccStudyOptions {
  std::vector<double> days{5.0, 15.0, 25.0};
  std::size_t n = 1000;
  std::uint64_t seed = 7;
  unsigned threads = 1;
  ode::IntegratorConfig integrator{};
  double max_failure_fraction = 0.05;
};

/// Extended model with constant treatment from t = 0 for every design row,
/// sampled at the observation days. Failed rows are dropped from all cells;
/// more than max_failure_fraction failures raises an error.
PrccReport run_prcc_study(const ModelParams& baseline, Diet diet, const PrccStudyOptions& options = {});

}  // namespace estrocon
