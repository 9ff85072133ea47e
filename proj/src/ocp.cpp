#include "estrocon/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "estrocon/error.hpp"
#include "estrocon/parallel.hpp"

namespace estrocon {

std::vector<std::string> OcpWeights::violations() const {
  std::vector<std::string> v;
  if (!(w_S > 0.0)) v.push_back(fmt::format("w_S must be > 0, got {}", w_S));
  if (!(w_R > 0.0)) v.push_back(fmt::format("w_R must be > 0, got {}", w_R));
  if (!(w_u > 0.0)) v.push_back(fmt::format("w_u must be > 0, got {}", w_u));
  return v;
}

std::vector<double> FbsOptions::default_step_weights() {
  std::vector<double> s;
  for (int k = 1; k <= 20; ++k) s.push_back(0.05 * k);
  s.back() = 1.0;
  return s;
}

std::vector<std::string> FbsOptions::violations() const {
  std::vector<std::string> v;
  if (grid_nodes < 3) v.push_back(fmt::format("grid_nodes must be >= 3, got {}", grid_nodes));
  if (!(lower >= 0.0 && lower <= upper && upper <= 1.0)) {
    v.push_back(fmt::format("control bounds must satisfy 0 <= lower <= upper <= 1, got [{}, {}]", lower, upper));
  }
  if (!(tolerance > 0.0)) v.push_back(fmt::format("tolerance must be > 0, got {}", tolerance));
  if (max_iterations < 1) v.emplace_back("max_iterations must be >= 1");
  if (step_weights.empty()) v.emplace_back("step_weights must not be empty");
  for (double s : step_weights) {
    if (!(s > 0.0 && s <= 1.0)) {
      v.push_back(fmt::format("step weight {} outside (0, 1]", s));
      break;
    }
  }
  if (!std::is_sorted(step_weights.begin(), step_weights.end())) v.emplace_back("step_weights must be ascending");
  return v;
}

double simpson(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n < 3) throw DomainError(fmt::format("simpson: need at least 3 samples, got {}", n));
  const std::size_t panels = n - 1;
  // Simpson needs an even panel count; an odd remainder of three panels uses
  // the 3/8 rule.
  const std::size_t even = panels % 2 == 0 ? panels : panels - 3;
  double sum = 0.0;
  if (even > 0) {
    double acc = f[0] + f[even];
    for (std::size_t i = 1; i < even; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    sum += acc * h / 3.0;
  }
  if (even != panels) {
    const std::size_t i = even;
    sum += 3.0 * h / 8.0 * (f[i] + 3.0 * f[i + 1] + 3.0 * f[i + 2] + f[i + 3]);
  }
  return sum;
}

double cost(const ExtendedTrajectory& traj, const OcpWeights& w) {
  const std::size_t n = traj.size();
  if (n < 3) throw DomainError(fmt::format("cost: need at least 3 grid nodes, got {}", n));
  if (traj.controls.size() != n) throw DomainError("cost: trajectory carries no control samples");
  const double h = (traj.times.back() - traj.times.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(traj.times[i] - traj.times[i - 1] - h) > 1e-9 * std::max(1.0, h)) {
      throw DomainError("cost: time grid is not uniform");
    }
  }
  std::vector<double> integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& y = traj.states[i];
    const double u = traj.controls[i];
    integrand[i] = w.w_S * y[0] + w.w_R * y[1] + 0.5 * w.w_u * u * u;
  }
  return simpson(integrand, h);
}

AdjointState adjoint_rhs(const StateExtended& x, const AdjointState& lam, double u, const ModelParams& p,
                         const OcpWeights& w) {
  for (double v : {x.S, x.R, x.E, x.F, lam.l1, lam.l2, lam.l3, lam.l4, u}) {
    if (!std::isfinite(v)) throw EvaluationError("adjoint_rhs: non-finite input");
  }
  const double g = growth_factor(x.E, p.k1, p.a1);
  const double dg = growth_factor_derivative(x.E, p.k1, p.a1);
  const double d2 = hill_term(x.E, p.a2, p.c, p.l);
  const double d3 = hill_term(x.E, p.a3, p.c, p.l);
  const double dd2 = hill_term_derivative(x.E, p.a2, p.c, p.l);
  const double dd3 = hill_term_derivative(x.E, p.a3, p.c, p.l);
  const double crowd = 1.0 - p.m1 * (x.S + p.eta * x.R);

  AdjointState d;
  d.l1 = -w.w_S - lam.l1 * (g * (1.0 - p.m1 * (2.0 * x.S + p.eta * x.R)) - d2 - d3) +
         lam.l2 * (p.m1 * p.k3 * x.R - d3) + lam.l4 * p.alpha * x.F;
  d.l2 = -w.w_R + lam.l1 * g * p.m1 * p.eta * x.S - lam.l2 * p.k3 * (1.0 - p.m1 * (x.S + 2.0 * p.eta * x.R)) +
         lam.l4 * p.alpha * x.F;
  d.l3 = -lam.l1 * (dg * x.S * crowd - (dd2 + dd3) * x.S) - lam.l2 * dd3 * x.S + lam.l3 * p.mu;
  d.l4 = -lam.l3 * (1.0 - u) * p.r - lam.l4 * (p.k2 - 2.0 * p.k2 * p.m2 * x.F - p.alpha * (x.S + x.R));
  for (double v : {d.l1, d.l2, d.l3, d.l4}) {
    if (!std::isfinite(v)) throw EvaluationError("adjoint_rhs: non-finite derivative");
  }
  return d;
}

double project_control(double lambda3, double F, const ModelParams& params, double w_u, double lower, double upper) {
  if (!(w_u > 0.0)) throw DomainError(fmt::format("project_control: w_u must be > 0, got {}", w_u));
  return std::clamp(params.r * F * lambda3 / w_u, lower, upper);
}

namespace {

/// Piecewise-linear control on a uniform grid.
struct UniformControl {
  double t0;
  double h;
  const std::vector<double>* values;

  double operator()(double t) const {
    const auto& v = *values;
    const double x = (t - t0) / h;
    if (x <= 0.0) return v.front();
    const auto i = static_cast<std::size_t>(x);
    if (i + 1 >= v.size()) return v.back();
    const double frac = x - static_cast<double>(i);
    return (1.0 - frac) * v[i] + frac * v[i + 1];
  }
};

class Sweep {
public:
  Sweep(const ModelParams& params, const StateExtended& x0, std::vector<double> grid, const OcpWeights& w,
        const FbsOptions& opts)
      : params_(params), x0_(x0.to_array()), grid_(std::move(grid)), w_(w), opts_(opts) {
    reversed_.assign(grid_.rbegin(), grid_.rend());
    h_ = (grid_.back() - grid_.front()) / static_cast<double>(grid_.size() - 1);
  }

  ExtendedTrajectory forward(const std::vector<double>& u) const {
    const UniformControl control{grid_.front(), h_, &u};
    auto rhs = [&](double t, const ode::Vec<4>& y) {
      const double ut = std::clamp(control(t), 0.0, 1.0);
      return rhs_extended(StateExtended::from_array(y), params_, ut).to_array();
    };
    auto traj = ode::integrate<4>(rhs, x0_, grid_.front(), grid_.back(), opts_.integrator, grid_,
                                  NonNegativeGuard{});
    traj.controls = u;
    return traj;
  }

  AdjointTrajectory backward(const ExtendedTrajectory& states, const std::vector<double>& u) const {
    const UniformControl control{grid_.front(), h_, &u};
    auto rhs = [&](double t, const ode::Vec<4>& lam) {
      const auto x = StateExtended::from_array(ode::sample(states, t));
      return adjoint_rhs(x, AdjointState::from_array(lam), control(t), params_, w_).to_array();
    };
    return ode::integrate<4>(rhs, ode::Vec<4>{0.0, 0.0, 0.0, 0.0}, grid_.back(), grid_.front(), opts_.integrator,
                             reversed_);
  }

  std::vector<double> project(const ExtendedTrajectory& states, const AdjointTrajectory& adj) const {
    std::vector<double> u(grid_.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = project_control(adj.states[i][2], states.states[i][3], params_, w_.w_u, opts_.lower, opts_.upper);
    }
    return u;
  }

  double J(const ExtendedTrajectory& traj) const { return cost(traj, w_); }

private:
  const ModelParams& params_;
  ode::Vec<4> x0_;
  std::vector<double> grid_;
  std::vector<double> reversed_;
  double h_ = 0.0;
  const OcpWeights& w_;
  const FbsOptions& opts_;
};

double rel_change(const std::vector<double>& cur, const std::vector<double>& pre) {
  double diff = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < cur.size(); ++i) {
    diff += std::abs(cur[i] - pre[i]);
    norm += std::abs(cur[i]);
  }
  return diff / std::max(norm, 1e-12);
}

double rel_change(const std::vector<ode::Vec<4>>& cur, const std::vector<ode::Vec<4>>& pre) {
  double worst = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      diff += std::abs(cur[i][k] - pre[i][k]);
      norm += std::abs(cur[i][k]);
    }
    worst = std::max(worst, diff / std::max(norm, 1e-12));
  }
  return worst;
}

}  // namespace

FbsResult fbs_solve(const ModelParams& params, const StateExtended& x_tr, double t_tr, double t_f,
                    const OcpWeights& w, const FbsOptions& opts) {
  auto v = params.violations();
  for (auto& s : w.violations()) v.push_back(std::move(s));
  for (auto& s : opts.violations()) v.push_back(std::move(s));
  if (!(t_tr < t_f)) v.push_back(fmt::format("t_tr ({}) must be below t_f ({})", t_tr, t_f));
  for (double c : {x_tr.S, x_tr.R, x_tr.E, x_tr.F}) {
    if (!(c >= 0.0)) {
      v.emplace_back("initial state must be non-negative");
      break;
    }
  }
  if (!v.empty()) throw ValidationError(std::move(v));

  const Sweep sweep(params, x_tr, ode::uniform_grid(t_tr, t_f, opts.grid_nodes), w, opts);

  std::vector<double> u_pre(opts.grid_nodes, std::clamp(0.0, opts.lower, opts.upper));
  auto x_pre = sweep.forward(u_pre);
  auto lam_pre = sweep.backward(x_pre, u_pre);
  double J_pre = sweep.J(x_pre);

  FbsResult best;
  auto keep = [&](const std::vector<double>& u, const ExtendedTrajectory& x, const AdjointTrajectory& lam, double J) {
    best.control.times = x.times;
    best.control.values = u;
    best.control.lower = opts.lower;
    best.control.upper = opts.upper;
    best.states = x;
    best.adjoints = lam;
    best.J = J;
  };
  keep(u_pre, x_pre, lam_pre, J_pre);

  FbsReport report;
  report.initial_J = J_pre;
  const std::size_t ns = opts.step_weights.size();
  std::vector<ExtendedTrajectory> candidates(ns);
  std::vector<double> candidate_J(ns);

  for (std::size_t iter = 1; iter <= opts.max_iterations; ++iter) {
    const auto u_cur = sweep.project(x_pre, lam_pre);

    parallel_for(ns, opts.threads, [&](std::size_t k) {
      const double s = opts.step_weights[k];
      std::vector<double> u_s(u_pre.size());
      for (std::size_t i = 0; i < u_s.size(); ++i) {
        u_s[i] = std::clamp((1.0 - s) * u_pre[i] + s * u_cur[i], opts.lower, opts.upper);
      }
      candidates[k] = sweep.forward(u_s);
      candidate_J[k] = sweep.J(candidates[k]);
    });

    // Ascending weights with a strict comparison keep the smallest s on ties.
    std::size_t pick = 0;
    for (std::size_t k = 1; k < ns; ++k) {
      if (candidate_J[k] < candidate_J[pick]) pick = k;
    }
    if (candidate_J[pick] > J_pre) {
      pick = 0;
      report.stagnated = true;
      report.stagnant_iterations.push_back(iter);
    }

    auto x_new = std::move(candidates[pick]);
    const auto& u_new = x_new.controls;
    auto lam_new = sweep.backward(x_new, u_new);
    const double J_new = candidate_J[pick];

    const double err = std::max({rel_change(x_new.states, x_pre.states), rel_change(lam_new.states, lam_pre.states),
                                 rel_change(u_new, u_pre)});
    report.iterations = iter;
    report.J_history.push_back(J_new);
    report.s_history.push_back(opts.step_weights[pick]);
    report.rel_error_history.push_back(err);
    report.final_rel_error = err;

    u_pre = u_new;
    x_pre = std::move(x_new);
    lam_pre = std::move(lam_new);
    J_pre = J_new;

    if (err < opts.tolerance) {
      report.converged = true;
      keep(u_pre, x_pre, lam_pre, J_pre);
      break;
    }
    if (J_pre <= best.J) keep(u_pre, x_pre, lam_pre, J_pre);
  }

  best.report = std::move(report);
  return best;
}

ExtendedTrajectory OcpScenarioRun::combined() const {
  ExtendedTrajectory out = untreated;
  out.append(solution.states);
  return out;
}

OcpScenarioRun solve_scenario_ocp(const ScenarioPreset& preset, Diet diet, const OcpWeights& w, double t_f,
                                  const FbsOptions& options, const SimulationOptions& sim) {
  OcpScenarioRun out;
  out.params = preset.params();
  out.init = preset.init(diet);
  TreatmentPlan none;
  const auto untreated = simulate_treated(out.params, out.init, none, t_f, sim);
  if (!untreated.t_tr || *untreated.t_tr >= t_f) {
    throw DomainError(fmt::format("scenario {} ({}): tumor never reaches the treatment threshold before t_f = {}",
                                  preset.name, to_string(diet), t_f));
  }
  out.t_tr = *untreated.t_tr;
  out.state_at_start = untreated.state_at_start;
  const auto& full = untreated.trajectory;
  for (std::size_t i = 0; i < full.size() && full.times[i] <= out.t_tr; ++i) {
    out.untreated.times.push_back(full.times[i]);
    out.untreated.states.push_back(full.states[i]);
    out.untreated.slopes.push_back(full.slopes[i]);
    out.untreated.controls.push_back(0.0);
  }
  out.solution = fbs_solve(out.params, out.state_at_start, out.t_tr, t_f, w, options);
  return out;
}

}  // namespace estrocon
