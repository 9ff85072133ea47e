#include "estrocon/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "estrocon/csv.hpp"
#include "estrocon/error.hpp"
#include "estrocon/parallel.hpp"
#include "estrocon/sensitivity.hpp"

namespace estrocon {

std::string_view to_string(Quantity q) { return q == Quantity::Tumor ? "tumor" : "fat"; }

Quantity parse_quantity(std::string_view text) {
  if (text == "tumor") return Quantity::Tumor;
  if (text == "fat") return Quantity::Fat;
  throw ValidationError({fmt::format("unknown quantity '{}' (expected tumor or fat)", text)});
}

// ------------------------------------------------------------------ CSV I/O

namespace {
constexpr std::string_view kMeasurementHeader = "diet,day,quantity,value,spread";
}

Measurements parse_measurements(std::istream& in) {
  csv::expect_header(in, kMeasurementHeader);
  Measurements out;
  std::vector<std::string> problems;
  csv::for_each_row(in, 5, [&](const std::vector<std::string_view>& f, std::size_t line) {
    Measurement m;
    if (f[0] == "CD") {
      m.diet = Diet::CD;
    } else if (f[0] == "HFD") {
      m.diet = Diet::HFD;
    } else {
      throw ParseError(fmt::format("line {}: unknown diet '{}'", line, f[0]), line);
    }
    m.day = csv::parse_double(f[1], line, "day");
    if (f[2] == "tumor") {
      m.quantity = Quantity::Tumor;
    } else if (f[2] == "fat") {
      m.quantity = Quantity::Fat;
    } else {
      throw ParseError(fmt::format("line {}: unknown quantity '{}'", line, f[2]), line);
    }
    m.value = csv::parse_double(f[3], line, "value");
    m.spread = csv::parse_optional(f[4], line, "spread");
    if (!(m.day >= 0.0)) problems.push_back(fmt::format("line {}: day must be >= 0, got {}", line, m.day));
    if (!(m.value >= 0.0)) problems.push_back(fmt::format("line {}: value must be >= 0, got {}", line, m.value));
    if (m.spread && !(*m.spread >= 0.0)) {
      problems.push_back(fmt::format("line {}: spread must be >= 0, got {}", line, *m.spread));
    }
    out.push_back(m);
  });
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return out;
}

Measurements load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open measurement file '{}'", path));
  return parse_measurements(in);
}

void write_measurements(std::ostream& out, const Measurements& data) {
  out << kMeasurementHeader << '\n';
  for (const auto& m : data) {
    out << to_string(m.diet) << ',' << csv::number(m.day) << ',' << to_string(m.quantity) << ','
        << csv::number(m.value) << ',' << (m.spread ? csv::number(*m.spread) : std::string()) << '\n';
  }
}

double steady_state_estrogen(double r_hat, double mu) {
  if (!(mu > 0.0)) throw DomainError(fmt::format("steady_state_estrogen: mu must be > 0, got {}", mu));
  return r_hat / mu;
}

// ------------------------------------------------------------- Nelder-Mead

namespace {

/// Maps the box to the unit cube, logarithmically where lo > 0.
class UnitMap {
public:
  explicit UnitMap(const Box& box) : box_(box) {
    for (std::size_t i = 0; i < box.lo.size(); ++i) log_.push_back(box.lo[i] > 0.0);
  }

  std::vector<double> to_box(const std::vector<double>& u) const {
    std::vector<double> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double t = std::clamp(u[i], 0.0, 1.0);
      if (log_[i]) {
        x[i] = std::exp(std::log(box_.lo[i]) + t * (std::log(box_.hi[i]) - std::log(box_.lo[i])));
      } else {
        x[i] = box_.lo[i] + t * (box_.hi[i] - box_.lo[i]);
      }
      x[i] = std::clamp(x[i], box_.lo[i], box_.hi[i]);
    }
    return x;
  }

private:
  const Box& box_;
  std::vector<bool> log_;
};

struct LocalResult {
  std::vector<double> u;
  double value = std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
  bool converged = false;
};

LocalResult nelder_mead(const std::function<double(const std::vector<double>&)>& g, std::vector<double> start,
                        const SimplexOptions& opt) {
  const std::size_t n = start.size();
  LocalResult res;
  auto eval = [&](std::vector<double>& u) {
    for (double& v : u) v = std::clamp(v, 0.0, 1.0);
    ++res.evaluations;
    const double f = g(u);
    return std::isfinite(f) ? f : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> simplex;
  std::vector<double> values;
  auto build = [&](const std::vector<double>& x0) {
    simplex.assign(1, x0);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = x0;
      v[i] += v[i] + 0.1 <= 1.0 ? 0.1 : -0.1;
      simplex.push_back(v);
    }
    values.clear();
    for (auto& v : simplex) values.push_back(eval(v));
  };

  constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  build(start);
  // One restart from the converged vertex guards against collapsed simplices.
  for (int round = 0; round < 2; ++round) {
    bool done = false;
    while (res.evaluations < opt.max_evaluations) {
      std::vector<std::size_t> order(n + 1);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      std::vector<std::vector<double>> s2;
      std::vector<double> v2;
      for (std::size_t k : order) {
        s2.push_back(simplex[k]);
        v2.push_back(values[k]);
      }
      simplex.swap(s2);
      values.swap(v2);

      double diameter = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t i = 0; i < n; ++i) diameter = std::max(diameter, std::abs(simplex[k][i] - simplex[0][i]));
      }
      const double spread = values[n] - values[0];
      if (diameter < opt.x_tolerance ||
          (std::isfinite(spread) && spread <= opt.f_tolerance * std::abs(values[0]) + 1e-300)) {
        done = true;
        break;
      }

      std::vector<double> centroid(n, 0.0);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);
      }
      auto along = [&](double t) {
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (simplex[n][i] - centroid[i]);
        return p;
      };

      auto xr = along(-alpha);
      const double fr = eval(xr);
      if (fr < values[0]) {
        auto xe = along(-gamma);
        const double fe = eval(xe);
        if (fe < fr) {
          simplex[n] = xe;
          values[n] = fe;
        } else {
          simplex[n] = xr;
          values[n] = fr;
        }
        continue;
      }
      if (fr < values[n - 1]) {
        simplex[n] = xr;
        values[n] = fr;
        continue;
      }
      const bool outside = fr < values[n];
      auto xc = along(outside ? -rho : rho);
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[n])) {
        simplex[n] = xc;
        values[n] = fc;
        continue;
      }
      for (std::size_t k = 1; k <= n; ++k) {
        for (std::size_t i = 0; i < n; ++i) simplex[k][i] = simplex[0][i] + sigma * (simplex[k][i] - simplex[0][i]);
        values[k] = eval(simplex[k]);
      }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    const bool improved = values[best] < res.value - opt.f_tolerance * std::abs(res.value);
    res.u = simplex[best];
    res.value = std::min(res.value, values[best]);
    res.converged = done;
    if (!done || !improved || res.evaluations >= opt.max_evaluations) break;
    build(res.u);
  }
  return res;
}

}  // namespace

SimplexResult minimize_box(const std::function<double(const std::vector<double>&)>& f, const Box& box,
                           const SimplexOptions& opt) {
  const std::size_t n = box.lo.size();
  std::vector<std::string> v;
  if (n == 0 || box.hi.size() != n) v.emplace_back("box: lo and hi must be non-empty and of equal length");
  for (std::size_t i = 0; i < std::min(n, box.hi.size()); ++i) {
    if (!(box.lo[i] < box.hi[i])) v.push_back(fmt::format("box: coordinate {} has lo {} >= hi {}", i, box.lo[i], box.hi[i]));
  }
  if (opt.starts < 1) v.emplace_back("starts must be >= 1");
  if (!v.empty()) throw ValidationError(std::move(v));

  const UnitMap map(box);
  auto g = [&](const std::vector<double>& u) { return f(map.to_box(u)); };

  std::vector<ParamRange> unit(n, ParamRange{"", 0.0, 1.0});
  Eigen::MatrixXd starts;
  if (opt.starts >= 2) {
    starts = lhs_sample(unit, opt.starts, opt.seed).samples;
  } else {
    starts = Eigen::MatrixXd::Constant(1, static_cast<Eigen::Index>(n), 0.5);
  }

  std::vector<LocalResult> local(opt.starts);
  parallel_for(opt.starts, opt.threads, [&](std::size_t s) {
    std::vector<double> x0(n);
    for (std::size_t i = 0; i < n; ++i) x0[i] = starts(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i));
    local[s] = nelder_mead(g, x0, opt);
  });

  SimplexResult out;
  for (std::size_t s = 0; s < local.size(); ++s) {
    out.evaluations += local[s].evaluations;
    if (local[s].value < local[out.best_start].value) out.best_start = s;
  }
  const auto& best = local[out.best_start];
  out.x = map.to_box(best.u);
  out.value = best.value;
  out.converged = best.converged;
  for (std::size_t i = 0; i < n; ++i) out.at_bound.push_back(best.u[i] < 1e-6 || best.u[i] > 1.0 - 1e-6);
  return out;
}

// ------------------------------------------------------------- calibration

double logistic(double g, double m, double T0, double t) {
  return 1.0 / (m + (1.0 / T0 - m) * std::exp(-g * t));
}

std::vector<double> simulate_basic_tumor(const ModelParams& params, const DietInit& init,
                                         const std::vector<double>& days, const ode::IntegratorConfig& cfg) {
  std::vector<double> grid{0.0};
  for (double d : days) grid.push_back(d);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  auto rhs = [&](double, const ode::Vec<3>& y) { return rhs_basic(StateBasic::from_array(y), params).to_array(); };
  const auto traj = ode::integrate<3>(rhs, StateBasic{init.T0, init.E0, init.F0}.to_array(), 0.0, grid.back(), cfg,
                                      grid, NonNegativeGuard{});
  std::vector<double> out;
  for (double d : days) out.push_back(ode::sample(traj, d)[0]);
  return out;
}

namespace {

struct Series {
  std::vector<double> days;
  std::vector<double> values;
};

Series select(const Measurements& data, Diet diet, Quantity q) {
  Series s;
  for (const auto& m : data) {
    if (m.diet == diet && m.quantity == q) {
      s.days.push_back(m.day);
      s.values.push_back(m.value);
    }
  }
  return s;
}

std::vector<std::string> names_at_bound(const SimplexResult& r, std::initializer_list<const char*> names) {
  std::vector<std::string> out;
  std::size_t i = 0;
  for (const char* n : names) {
    if (r.at_bound[i++]) out.emplace_back(n);
  }
  return out;
}

void require_converged(const SimplexResult& r, const char* step) {
  if (r.converged) return;
  std::string x;
  for (double v : r.x) x += fmt::format(" {:.6g}", v);
  throw ConvergenceError(fmt::format("{}: no start met the simplex tolerances; best residual {:.6g} at [{} ]", step,
                                     r.value, x));
}

}  // namespace

Step1Result fit_step1(const Measurements& data, double m1, double mu, const Step1Bounds& b,
                      const SimplexOptions& opt) {
  const Series cd = select(data, Diet::CD, Quantity::Tumor);
  const Series hfd = select(data, Diet::HFD, Quantity::Tumor);
  std::vector<std::string> v;
  if (cd.days.size() < 3) v.push_back(fmt::format("step 1 needs >= 3 CD tumor points, got {}", cd.days.size()));
  if (hfd.days.size() < 3) v.push_back(fmt::format("step 1 needs >= 3 HFD tumor points, got {}", hfd.days.size()));
  if (!(m1 > 0.0)) v.push_back(fmt::format("m1 must be > 0, got {}", m1));
  if (!(mu > 0.0)) v.push_back(fmt::format("mu must be > 0, got {}", mu));
  if (!v.empty()) throw ValidationError(std::move(v));

  const Box box{{b.k1_lo, b.a1_lo, mu * b.E_lo, mu * b.E_lo}, {b.k1_hi, b.a1_hi, mu * b.E_hi, mu * b.E_hi}};
  auto sse = [&](const std::vector<double>& x) {
    double total = 0.0;
    for (const auto* s : {&cd, &hfd}) {
      const double E = steady_state_estrogen(s == &cd ? x[2] : x[3], mu);
      const double g = growth_factor(E, x[0], x[1]);
      for (std::size_t i = 0; i < s->days.size(); ++i) {
        const double d = logistic(g, m1, 1.0, s->days[i]) - s->values[i];
        total += d * d;
      }
    }
    return total;
  };
  const auto r = minimize_box(sse, box, opt);
  require_converged(r, "calibration step 1");
  Step1Result out;
  out.k1 = r.x[0];
  out.a1 = r.x[1];
  out.r_CD = r.x[2];
  out.r_HFD = r.x[3];
  out.residual = r.value;
  out.converged = r.converged;
  out.at_bound = names_at_bound(r, {"k1", "a1", "r_CD", "r_HFD"});
  return out;
}

Step2Result fit_step2(const Measurements& data, const Step2Fixed& fx, const Step2Bounds& b, const SimplexOptions& opt,
                      const ode::IntegratorConfig& cfg) {
  std::vector<std::string> v;
  struct DietData {
    Diet diet;
    double r_hat;
    Series tumor, fat;
  };
  std::vector<DietData> diets;
  for (Diet d : {Diet::CD, Diet::HFD}) {
    DietData dd{d, d == Diet::CD ? fx.r_CD : fx.r_HFD, select(data, d, Quantity::Tumor), select(data, d, Quantity::Fat)};
    if (dd.fat.days.empty()) v.push_back(fmt::format("step 2 needs fat data for {}", to_string(d)));
    if (dd.tumor.days.empty()) v.push_back(fmt::format("step 2 needs tumor data for {}", to_string(d)));
    if (!(dd.r_hat > 0.0)) v.push_back(fmt::format("step 2 needs r_{} > 0 from step 1", to_string(d)));
    diets.push_back(std::move(dd));
  }
  if (!(fx.mu > 0.0)) v.push_back(fmt::format("mu must be > 0, got {}", fx.mu));
  if (!v.empty()) throw ValidationError(std::move(v));

  ModelParams base;
  base.k1 = fx.k1;
  base.a1 = fx.a1;
  base.m1 = fx.m1;
  base.mu = fx.mu;

  auto sse = [&](const std::vector<double>& x) {
    ModelParams p = base;
    p.r = x[0];
    p.alpha = x[1];
    double total = 0.0;
    for (const auto& dd : diets) {
      DietInit init;
      init.T0 = 1.0;
      init.E0 = steady_state_estrogen(dd.r_hat, p.mu);
      init.F0 = dd.r_hat / p.r;
      std::vector<double> days = dd.tumor.days;
      days.insert(days.end(), dd.fat.days.begin(), dd.fat.days.end());
      std::vector<double> grid{0.0};
      grid.insert(grid.end(), days.begin(), days.end());
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      auto rhs = [&](double, const ode::Vec<3>& y) { return rhs_basic(StateBasic::from_array(y), p).to_array(); };
      const auto traj = ode::integrate<3>(rhs, StateBasic{init.T0, init.E0, init.F0}.to_array(), 0.0, grid.back(),
                                          cfg, grid, NonNegativeGuard{});
      for (std::size_t i = 0; i < dd.tumor.days.size(); ++i) {
        const double d = ode::sample(traj, dd.tumor.days[i])[0] - dd.tumor.values[i];
        total += d * d;
      }
      for (std::size_t i = 0; i < dd.fat.days.size(); ++i) {
        const double d = ode::sample(traj, dd.fat.days[i])[2] - dd.fat.values[i];
        total += d * d;
      }
    }
    return total;
  };
  const auto r = minimize_box(sse, Box{{b.r_lo, b.alpha_lo}, {b.r_hi, b.alpha_hi}}, opt);
  require_converged(r, "calibration step 2");
  Step2Result out;
  out.r = r.x[0];
  out.alpha = r.x[1];
  out.residual = r.value;
  out.converged = r.converged;
  out.at_bound = names_at_bound(r, {"r", "alpha"});
  return out;
}

ModelParams CalibrationResult::params() const {
  ModelParams p;
  p.k1 = step1.k1;
  p.a1 = step1.a1;
  p.r = step2.r;
  p.alpha = step2.alpha;
  return p;
}

DietInit CalibrationResult::init(Diet diet) const {
  DietInit d = DietInit::table(diet);
  d.E0 = diet == Diet::CD ? E0_CD : E0_HFD;
  d.F0 = diet == Diet::CD ? F0_CD : F0_HFD;
  return d;
}

CalibrationResult calibrate(const Measurements& data, double m1, double mu, const SimplexOptions& options) {
  CalibrationResult out;
  out.step1 = fit_step1(data, m1, mu, {}, options);
  SimplexOptions second = options;
  second.seed = options.seed + 1;
  out.step2 = fit_step2(data, {out.step1.k1, out.step1.a1, out.step1.r_CD, out.step1.r_HFD, m1, mu}, {}, second);
  out.E0_CD = steady_state_estrogen(out.step1.r_CD, mu);
  out.E0_HFD = steady_state_estrogen(out.step1.r_HFD, mu);
  out.F0_CD = out.step1.r_CD / out.step2.r;
  out.F0_HFD = out.step1.r_HFD / out.step2.r;
  return out;
}

Measurements synthesize_measurements(const ModelParams& params, const DietInit& cd, const DietInit& hfd,
                                     const std::vector<double>& tumor_days, const std::vector<double>& fat_days) {
  Measurements out;
  for (const DietInit* init : {&cd, &hfd}) {
    std::vector<double> grid{0.0};
    grid.insert(grid.end(), tumor_days.begin(), tumor_days.end());
    grid.insert(grid.end(), fat_days.begin(), fat_days.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    auto rhs = [&](double, const ode::Vec<3>& y) { return rhs_basic(StateBasic::from_array(y), params).to_array(); };
    const auto traj = ode::integrate<3>(rhs, StateBasic{init->T0, init->E0, init->F0}.to_array(), 0.0, grid.back(),
                                        ode::IntegratorConfig{.rtol = 1e-12, .atol = 1e-12, .initial_step = std::nullopt}, grid, NonNegativeGuard{});
    for (double d : tumor_days) out.push_back({init->diet, d, Quantity::Tumor, ode::sample(traj, d)[0], std::nullopt});
    for (double d : fat_days) out.push_back({init->diet, d, Quantity::Fat, ode::sample(traj, d)[2], std::nullopt});
  }
  return out;
}

}  // namespace estrocon
