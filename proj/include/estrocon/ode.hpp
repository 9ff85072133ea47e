#pragma once

// Adaptive Dormand-Prince 5(4) integrator with PI step-size control.
//
// When an output grid is supplied every grid node is a step endpoint, so the
// stored states are integrator solutions rather than interpolants. Between
// nodes, `sample` evaluates the cubic Hermite interpolant built from the
// stored states and right-hand-side slopes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <fmt/format.h>

#include "estrocon/error.hpp"

namespace estrocon::ode {

template <std::size_t N>
using Vec = std::array<double, N>;

struct IntegratorConfig {
  double rtol = 1e-8;
  double atol = 1e-10;
  std::size_t max_steps = 1'000'000;
  std::optional<double> initial_step;  // days; sign is ignored

  void validate() const {
    std::vector<std::string> v;
    if (!(rtol > 0.0)) v.push_back(fmt::format("rtol must be > 0, got {}", rtol));
    if (!(atol > 0.0)) v.push_back(fmt::format("atol must be > 0, got {}", atol));
    if (max_steps < 1) v.emplace_back("max_steps must be >= 1");
    if (initial_step && !(std::abs(*initial_step) > 0.0)) v.emplace_back("initial_step must be non-zero");
    if (!v.empty()) throw ValidationError(std::move(v));
  }
};

/// Time grid with one state (and slope) per node; `controls` is either empty
/// or parallel to `times`. Times are strictly increasing.
template <std::size_t N>
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec<N>> states;
  std::vector<Vec<N>> slopes;
  std::vector<double> controls;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  double front_time() const { return times.front(); }
  double back_time() const { return times.back(); }

  /// Appends `next`, merging its first node with our last node when both sit
  /// at the same time (the later segment's slope and control win).
  void append(const Trajectory& next) {
    std::size_t start = 0;
    if (!empty() && !next.empty() && next.times.front() == times.back()) {
      states.back() = next.states.front();
      slopes.back() = next.slopes.front();
      if (!controls.empty() && !next.controls.empty()) controls.back() = next.controls.front();
      start = 1;
    }
    times.insert(times.end(), next.times.begin() + start, next.times.end());
    states.insert(states.end(), next.states.begin() + start, next.states.end());
    slopes.insert(slopes.end(), next.slopes.begin() + start, next.slopes.end());
    if (!next.controls.empty()) controls.insert(controls.end(), next.controls.begin() + start, next.controls.end());
  }
};

/// Guard that accepts every step unchanged.
struct NoGuard {
  template <std::size_t N>
  bool operator()(Vec<N>&) const { return true; }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

template <std::size_t N>
void check_finite(const Vec<N>& v, double t, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (!std::isfinite(v[i])) {
      throw EvaluationError(fmt::format("{} component {} is not finite at t = {}", what, i, t));
    }
  }
}

template <std::size_t N>
double error_norm(const Vec<N>& err, const Vec<N>& y0, const Vec<N>& y1, const IntegratorConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double scale = cfg.atol + cfg.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / scale;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(N));
}

// Starting step after Hairer, Norsett & Wanner, "Solving ODEs I", II.4.
template <std::size_t N, class Rhs>
double initial_step(Rhs& rhs, double t0, const Vec<N>& y0, const Vec<N>& f0, double direction, double span,
                    const IntegratorConfig& cfg) {
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = cfg.atol + cfg.rtol * std::abs(y0[i]);
    d0 += (y0[i] / sc) * (y0[i] / sc);
    d1 += (f0[i] / sc) * (f0[i] / sc);
  }
  d0 = std::sqrt(d0 / N);
  d1 = std::sqrt(d1 / N);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  Vec<N> y1;
  for (std::size_t i = 0; i < N; ++i) y1[i] = y0[i] + direction * h0 * f0[i];
  const Vec<N> f1 = rhs(t0 + direction * h0, y1);
  check_finite(f1, t0 + direction * h0, "right-hand side");
  double d2 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = cfg.atol + cfg.rtol * std::abs(y0[i]);
    d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
  }
  d2 = std::sqrt(d2 / N) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

}  // namespace detail

/// Integrates dy/dt = rhs(t, y) from t0 to t1 (t1 < t0 integrates backwards).
///
/// With a non-empty `output_grid` (monotone in the direction of integration,
/// inside [t0, t1]) the result holds exactly those nodes; otherwise it holds
/// t0 and every accepted step. The result is always sorted by increasing time.
/// `guard(y)` sees each candidate step end-state; returning false rejects the
/// step and halves the step size, and it may modify y in place (clamping).
template <std::size_t N, class Rhs, class Guard = NoGuard>
Trajectory<N> integrate(Rhs&& rhs, const Vec<N>& y0, double t0, double t1, const IntegratorConfig& cfg,
                        std::span<const double> output_grid = {}, Guard guard = {}) {
  cfg.validate();
  if (!std::isfinite(t0) || !std::isfinite(t1) || t0 == t1) {
    throw DomainError(fmt::format("integrate: invalid span [{}, {}]", t0, t1));
  }
  detail::check_finite(y0, t0, "initial state");
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double eps_t = 1e-12 * std::max({1.0, std::abs(t0), std::abs(t1)});

  for (std::size_t i = 0; i < output_grid.size(); ++i) {
    const double g = output_grid[i];
    if ((g - t0) * direction < -eps_t || (t1 - g) * direction < -eps_t) {
      throw DomainError(fmt::format("integrate: output node {} outside [{}, {}]", g, t0, t1));
    }
    if (i > 0 && (g - output_grid[i - 1]) * direction <= 0.0) {
      throw DomainError("integrate: output grid must be strictly monotone in the integration direction");
    }
  }

  Trajectory<N> out;
  const bool dense = output_grid.empty();
  std::size_t next_node = 0;

  double t = t0;
  Vec<N> y = y0;
  Vec<N> f = rhs(t, y);
  detail::check_finite(f, t, "right-hand side");

  auto record = [&](double time) {
    out.times.push_back(time);
    out.states.push_back(y);
    out.slopes.push_back(f);
  };
  if (dense) {
    record(t);
  } else {
    while (next_node < output_grid.size() && std::abs(output_grid[next_node] - t) <= eps_t) {
      record(output_grid[next_node]);
      ++next_node;
    }
  }

  double h = cfg.initial_step ? std::min(std::abs(*cfg.initial_step), span)
                              : detail::initial_step<N>(rhs, t, y, f, direction, span, cfg);
  double prev_err = 1e-4;
  bool last_rejected = false;
  std::size_t steps = 0;

  constexpr double safety = 0.9, fac_min = 0.2, fac_max = 10.0;
  constexpr double beta = 0.04, alpha = 0.2 - 0.75 * beta;

  Vec<N> k2, k3, k4, k5, k6, k7, ytmp, ynew, err;
  while ((t1 - t) * direction > eps_t) {
    if (steps >= cfg.max_steps) {
      throw IntegrationError(fmt::format("integrate: step budget {} exhausted at t = {}", cfg.max_steps, t), t);
    }
    // Land exactly on the next output node or the end of the span.
    double target = t1;
    if (!dense && next_node < output_grid.size()) target = output_grid[next_node];
    double remaining = std::abs(target - t);
    bool hits_target = false;
    if (h >= remaining * (1.0 - 1e-12)) {
      h = remaining;
      hits_target = true;
    }
    const double min_step = 1e-14 * std::max(1.0, std::abs(t));
    if (h < min_step) {
      throw IntegrityError(fmt::format("integrate: step size underflow ({}) at t = {}", h, t));
    }
    const double hs = direction * h;

    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * detail::a21 * f[i];
    k2 = rhs(t + detail::c2 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i) ytmp[i] = y[i] + hs * (detail::a31 * f[i] + detail::a32 * k2[i]);
    k3 = rhs(t + detail::c3 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hs * (detail::a41 * f[i] + detail::a42 * k2[i] + detail::a43 * k3[i]);
    k4 = rhs(t + detail::c4 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hs * (detail::a51 * f[i] + detail::a52 * k2[i] + detail::a53 * k3[i] + detail::a54 * k4[i]);
    k5 = rhs(t + detail::c5 * hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ytmp[i] = y[i] + hs * (detail::a61 * f[i] + detail::a62 * k2[i] + detail::a63 * k3[i] + detail::a64 * k4[i] +
                             detail::a65 * k5[i]);
    const double t_new = hits_target ? target : t + hs;
    k6 = rhs(t + hs, ytmp);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + hs * (detail::b1 * f[i] + detail::b3 * k3[i] + detail::b4 * k4[i] + detail::b5 * k5[i] +
                             detail::b6 * k6[i]);
    detail::check_finite(ynew, t_new, "state");
    k7 = rhs(t_new, ynew);
    detail::check_finite(k7, t_new, "right-hand side");
    for (std::size_t i = 0; i < N; ++i)
      err[i] = hs * (detail::e1 * f[i] + detail::e3 * k3[i] + detail::e4 * k4[i] + detail::e5 * k5[i] +
                     detail::e6 * k6[i] + detail::e7 * k7[i]);
    const double en = detail::error_norm(err, y, ynew, cfg);
    ++steps;

    if (en > 1.0) {
      h *= std::max(fac_min, safety * std::pow(en, -alpha));
      last_rejected = true;
      continue;
    }
    const Vec<N> unguarded = ynew;
    if (!guard(ynew)) {
      h *= 0.5;
      last_rejected = true;
      continue;
    }
    if (ynew != unguarded) {
      k7 = rhs(t_new, ynew);
      detail::check_finite(k7, t_new, "right-hand side");
    }

    t = t_new;
    y = ynew;
    f = k7;
    if (dense) {
      record(t);
    } else if (hits_target && next_node < output_grid.size()) {
      record(output_grid[next_node]);
      ++next_node;
    }

    double fac = en == 0.0 ? fac_max : safety * std::pow(en, -alpha) * std::pow(prev_err, beta);
    fac = std::clamp(fac, fac_min, fac_max);
    if (last_rejected) fac = std::min(fac, 1.0);
    h *= fac;
    prev_err = std::max(en, 1e-4);
    last_rejected = false;
  }

  if (!dense && next_node < output_grid.size()) {
    // Nodes equal to t1 up to rounding.
    while (next_node < output_grid.size()) {
      record(output_grid[next_node]);
      ++next_node;
    }
  }

  if (direction < 0.0) {
    std::reverse(out.times.begin(), out.times.end());
    std::reverse(out.states.begin(), out.states.end());
    std::reverse(out.slopes.begin(), out.slopes.end());
  }
  return out;
}

/// Cubic Hermite interpolation of the trajectory at t. Exact at grid nodes.
template <std::size_t N>
Vec<N> sample(const Trajectory<N>& traj, double t) {
  if (traj.empty()) throw DomainError("sample: empty trajectory");
  const double lo = traj.times.front(), hi = traj.times.back();
  const double slack = 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
  if (!(t >= lo - slack && t <= hi + slack)) {
    throw DomainError(fmt::format("sample: t = {} outside [{}, {}]", t, lo, hi));
  }
  t = std::clamp(t, lo, hi);
  auto it = std::upper_bound(traj.times.begin(), traj.times.end(), t);
  if (it == traj.times.end()) return traj.states.back();
  const std::size_t j = static_cast<std::size_t>(it - traj.times.begin());
  const std::size_t i = j - 1;
  const double t0 = traj.times[i], t1 = traj.times[j];
  if (t == t0) return traj.states[i];
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  Vec<N> out;
  for (std::size_t k = 0; k < N; ++k) {
    out[k] = h00 * traj.states[i][k] + h10 * h * traj.slopes[i][k] + h01 * traj.states[j][k] +
             h11 * h * traj.slopes[j][k];
  }
  return out;
}

/// Uniform grid of `count` nodes on [a, b], with both ends exact.
inline std::vector<double> uniform_grid(double a, double b, std::size_t count) {
  if (count < 2) throw DomainError("uniform_grid: need at least 2 nodes");
  std::vector<double> g(count);
  const double h = (b - a) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) g[i] = a + h * static_cast<double>(i);
  g.back() = b;
  return g;
}

}  // namespace estrocon::ode
