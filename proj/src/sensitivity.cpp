#include "estrocon/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "estrocon/error.hpp"
#include "estrocon/parallel.hpp"
#include "estrocon/treatment.hpp"

namespace estrocon {

LhsDesign lhs_sample(const std::vector<ParamRange>& ranges, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError(fmt::format("lhs_sample: need n >= 2, got {}", n));
  for (const auto& r : ranges) {
    if (!(r.lo < r.hi)) throw DomainError(fmt::format("lhs_sample: empty range [{}, {}] for {}", r.lo, r.hi, r.name));
  }
  LhsDesign design;
  design.ranges = ranges;
  design.seed = seed;
  design.samples.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(ranges.size()));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> strata(n);
  const double dn = static_cast<double>(n);
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    const double width = ranges[j].hi - ranges[j].lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = (static_cast<double>(strata[i]) + unit(rng)) / dn;
      design.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ranges[j].lo + width * x;
    }
  }
  return design;
}

Eigen::VectorXd rank_transform(const Eigen::VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b));
  });
  Eigen::VectorXd ranks(x.size());
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    const double v = x(static_cast<Eigen::Index>(order[i]));
    while (j + 1 < n && x(static_cast<Eigen::Index>(order[j + 1])) == v) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks(static_cast<Eigen::Index>(order[k])) = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

Eigen::MatrixXd rank_columns(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = rank_transform(m.col(j));
  return out;
}

std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double aa = a.squaredNorm(), bb = b.squaredNorm();
  // Residuals of a regression with intercept have zero mean already.
  const double scale = static_cast<double>(a.size());
  if (aa <= 1e-20 * scale * scale || bb <= 1e-20 * scale * scale) return std::nullopt;
  return std::clamp(a.dot(b) / std::sqrt(aa * bb), -1.0, 1.0);
}

/// Residuals of every column of `targets` after least squares on `design`,
/// or nothing when `design` is rank deficient.
std::optional<Eigen::MatrixXd> residualize(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols()) return std::nullopt;
  const Eigen::MatrixXd coef = qr.solve(targets);
  return Eigen::MatrixXd(targets - design * coef);
}

Eigen::MatrixXd design_without(const Eigen::MatrixXd& ranked, Eigen::Index which) {
  Eigen::MatrixXd x(ranked.rows(), ranked.cols());
  x.col(0).setOnes();
  Eigen::Index c = 1;
  for (Eigen::Index j = 0; j < ranked.cols(); ++j) {
    if (j != which) x.col(c++) = ranked.col(j);
  }
  return x;
}

}  // namespace

std::vector<std::vector<std::optional<double>>> prcc_matrix(const Eigen::MatrixXd& samples,
                                                            const Eigen::MatrixXd& outputs) {
  if (samples.rows() < 3) throw DomainError(fmt::format("prcc: need at least 3 samples, got {}", samples.rows()));
  if (outputs.rows() != samples.rows()) throw DomainError("prcc: samples and outputs differ in length");
  if (!outputs.allFinite() || !samples.allFinite()) throw DomainError("prcc: non-finite input");

  const Eigen::MatrixXd rx = rank_columns(samples);
  const Eigen::MatrixXd ry = rank_columns(outputs);
  std::vector<std::vector<std::optional<double>>> out(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    auto& row = out[static_cast<std::size_t>(j)];
    row.assign(static_cast<std::size_t>(outputs.cols()), std::nullopt);
    Eigen::MatrixXd targets(rx.rows(), 1 + ry.cols());
    targets.col(0) = rx.col(j);
    targets.rightCols(ry.cols()) = ry;
    const auto res = residualize(design_without(rx, j), targets);
    if (!res) continue;
    for (Eigen::Index k = 0; k < ry.cols(); ++k) {
      row[static_cast<std::size_t>(k)] = pearson(res->col(0), res->col(1 + k));
    }
  }
  return out;
}

std::optional<double> prcc(const Eigen::MatrixXd& samples, const Eigen::VectorXd& output, std::size_t which) {
  if (which >= static_cast<std::size_t>(samples.cols())) throw DomainError("prcc: column index out of range");
  Eigen::MatrixXd y(output.size(), 1);
  y.col(0) = output;
  return prcc_matrix(samples, y)[which][0];
}

namespace {

constexpr std::string_view kParamNames[] = {"k1", "a1", "m1", "mu", "r",  "alpha", "k2", "m2",
                                            "k3", "c",  "l",  "a2", "a3", "eta",   "p"};

template <class Params>
auto* param_field(Params& p, std::string_view name) {
  decltype(&p.k1) fields[] = {&p.k1, &p.a1, &p.m1, &p.mu, &p.r,  &p.alpha, &p.k2, &p.m2,
                              &p.k3, &p.c,  &p.l,  &p.a2, &p.a3, &p.eta,   &p.p};
  for (std::size_t i = 0; i < std::size(kParamNames); ++i) {
    if (kParamNames[i] == name) return fields[i];
  }
  throw ValidationError({fmt::format("unknown parameter '{}'", name)});
}

}  // namespace

double get_param(const ModelParams& params, std::string_view name) { return *param_field(params, name); }

void set_param(ModelParams& params, std::string_view name, double value) { *param_field(params, name) = value; }

const std::vector<std::string>& prcc_parameter_names() {
  static const std::vector<std::string> names{"k1", "a1", "m1", "mu", "r", "alpha", "k2",
                                              "m2", "k3", "c",  "l",  "a3", "p"};
  return names;
}

ModelParams prcc_baseline() {
  ModelParams p;
  p.a2 = 5.0;
  p.a3 = 5.0;
  p.p = 0.5;
  p.k3 = p.k1 / 2.0;
  return p;
}

std::vector<ParamRange> prcc_ranges(const ModelParams& baseline) {
  std::vector<ParamRange> out;
  for (const auto& name : prcc_parameter_names()) {
    const double b = get_param(baseline, name);
    double hi = 2.0 * b;
    if (name == "p") hi = std::min(hi, 1.0);
    out.push_back({name, 0.5 * b, hi});
  }
  return out;
}

const PrccCell* PrccReport::find(std::string_view param, char output, double day) const {
  for (const auto& c : cells) {
    if (c.param == param && c.output == output && c.day == day) return &c;
  }
  return nullptr;
}

PrccReport run_prcc_study(const ModelParams& baseline, Diet diet, const PrccStudyOptions& opts) {
  auto v = baseline.violations();
  if (opts.days.empty()) v.emplace_back("at least one observation day is required");
  for (std::size_t i = 0; i < opts.days.size(); ++i) {
    if (!(opts.days[i] > 0.0) || (i > 0 && !(opts.days[i] > opts.days[i - 1]))) {
      v.emplace_back("observation days must be positive and strictly increasing");
      break;
    }
  }
  if (opts.n < 3) v.push_back(fmt::format("n must be >= 3, got {}", opts.n));
  if (!v.empty()) throw ValidationError(std::move(v));

  const auto& names = prcc_parameter_names();
  const auto design = lhs_sample(prcc_ranges(baseline), opts.n, opts.seed);
  const auto l_col = static_cast<Eigen::Index>(std::find(names.begin(), names.end(), "l") - names.begin());
  Eigen::MatrixXd samples = design.samples;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) samples(i, l_col) = std::round(samples(i, l_col));

  const std::size_t nd = opts.days.size();
  std::vector<double> times{0.0};
  times.insert(times.end(), opts.days.begin(), opts.days.end());
  const DietInit init = DietInit::table(diet);
  const StateExtended y0{init.S0, init.R0, init.E0, init.F0};

  // Row-keyed outputs keep aggregation independent of scheduling.
  std::vector<std::vector<double>> values(opts.n);
  std::vector<std::string> errors(opts.n);
  parallel_for(opts.n, opts.threads, [&](std::size_t i) {
    ModelParams p = baseline;
    for (std::size_t j = 0; j < names.size(); ++j) {
      set_param(p, names[j], samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    try {
      p.validate();
      const auto traj = simulate_constant(p, y0, control_from_factor(p.p), times, opts.integrator);
      std::vector<double> row;
      for (std::size_t d = 0; d < nd; ++d) {
        const auto& y = traj.states[d + 1];
        row.insert(row.end(), y.begin(), y.end());
      }
      values[i] = std::move(row);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });

  PrccReport report;
  report.baseline = baseline;
  report.diet = diet;
  report.days = opts.days;
  report.n_samples = opts.n;
  report.seed = opts.seed;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < opts.n; ++i) {
    if (values[i].empty()) {
      report.failures.push_back({i, errors[i]});
    } else {
      kept.push_back(i);
    }
  }
  if (static_cast<double>(report.failures.size()) > opts.max_failure_fraction * static_cast<double>(opts.n)) {
    throw ConvergenceError(fmt::format("prcc study: {} of {} simulations failed (first: row {}: {})",
                                       report.failures.size(), opts.n, report.failures.front().row,
                                       report.failures.front().reason));
  }

  const auto m = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd x(m, samples.cols());
  Eigen::MatrixXd y(m, static_cast<Eigen::Index>(4 * nd));
  for (Eigen::Index r = 0; r < m; ++r) {
    const std::size_t i = kept[static_cast<std::size_t>(r)];
    x.row(r) = samples.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = 0; k < 4 * nd; ++k) y(r, static_cast<Eigen::Index>(k)) = values[i][k];
  }
  const auto table = prcc_matrix(x, y);

  static constexpr char outputs[] = {'S', 'R', 'E', 'F'};
  for (std::size_t j = 0; j < names.size(); ++j) {
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t d = 0; d < nd; ++d) {
        report.cells.push_back({names[j], outputs[o], opts.days[d], table[j][d * 4 + o], kept.size()});
      }
    }
  }
  return report;
}

}  // namespace estrocon
