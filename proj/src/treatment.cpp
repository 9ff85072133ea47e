#include "estrocon/treatment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "estrocon/error.hpp"

namespace estrocon {

// ---------------------------------------------------------------- ControlGrid

ControlGrid ControlGrid::constant(double t0, double t1, std::size_t count, double value, double lower, double upper) {
  ControlGrid g;
  g.times = ode::uniform_grid(t0, t1, count);
  g.values.assign(count, value);
  g.lower = lower;
  g.upper = upper;
  return g;
}

double ControlGrid::at(double t) const {
  if (times.empty()) return 0.0;
  if (t <= times.front()) return values.front();
  if (t >= times.back()) return values.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - times.begin());
  const std::size_t i = j - 1;
  const double w = (t - times[i]) / (times[j] - times[i]);
  return (1.0 - w) * values[i] + w * values[j];
}

std::vector<std::string> ControlGrid::violations() const {
  std::vector<std::string> out;
  if (times.size() != values.size()) out.emplace_back("control grid: times and values differ in length");
  if (times.size() < 2) out.emplace_back("control grid: need at least 2 nodes");
  if (!(lower <= upper)) out.push_back(fmt::format("control grid: lower bound {} exceeds upper bound {}", lower, upper));
  if (lower < 0.0 || upper > 1.0) out.emplace_back("control grid: bounds must lie in [0, 1]");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      out.emplace_back("control grid: times must be strictly increasing");
      break;
    }
  }
  for (double v : values) {
    if (!(v >= lower && v <= upper)) {
      out.push_back(fmt::format("control grid: value {} outside [{}, {}]", v, lower, upper));
      break;
    }
  }
  return out;
}

// -------------------------------------------------------------- TreatmentPlan

namespace {

double parse_number(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError({fmt::format("treatment plan: cannot parse {} from '{}'", what, text)});
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::vector<std::string> TreatmentPlan::violations() const {
  std::vector<std::string> out;
  if (!(start_fraction > 0.0)) out.push_back(fmt::format("start fraction must be > 0, got {}", start_fraction));
  if (const auto* c = std::get_if<ConstantTreatment>(&kind)) {
    if (!(c->p > 0.0 && c->p <= 1.0)) out.push_back(fmt::format("constant plan: p must lie in (0, 1], got {}", c->p));
  } else if (const auto* a = std::get_if<AlternatingTreatment>(&kind)) {
    if (!(a->u_b >= 0.0 && a->u_b < 1.0)) out.push_back(fmt::format("alternating plan: u_b must lie in [0, 1), got {}", a->u_b));
    if (!(a->on_days > 0.0)) out.push_back(fmt::format("alternating plan: on_days must be > 0, got {}", a->on_days));
    if (!(a->off_days > 0.0)) out.push_back(fmt::format("alternating plan: off_days must be > 0, got {}", a->off_days));
  } else if (const auto* e = std::get_if<ExternalTreatment>(&kind)) {
    auto v = e->control.violations();
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

TreatmentPlan TreatmentPlan::parse(std::string_view text) {
  TreatmentPlan plan;
  const auto parts = split(text, ':');
  const auto head = parts.front();
  if (head == "none" && parts.size() == 1) {
    plan.kind = NoTreatment{};
  } else if (head == "constant" && parts.size() == 2) {
    plan.kind = ConstantTreatment{parse_number(parts[1], "p")};
  } else if (head == "alternating" && parts.size() == 4) {
    plan.kind = AlternatingTreatment{parse_number(parts[1], "u_b"), parse_number(parts[2], "on_days"),
                                     parse_number(parts[3], "off_days")};
  } else if (head == "alternating-short" && parts.size() == 1) {
    plan.kind = AlternatingTreatment{0.99, 1.0, 1.0};
  } else if (head == "alternating-long" && parts.size() == 1) {
    plan.kind = AlternatingTreatment{0.99, 2.0, 2.0};
  } else {
    throw ValidationError({fmt::format(
        "unknown treatment plan '{}' (expected none, constant:<p>, alternating:<u_b>:<on>:<off>, "
        "alternating-short or alternating-long)",
        text)});
  }
  auto v = plan.violations();
  if (!v.empty()) throw ValidationError(std::move(v));
  return plan;
}

std::string TreatmentPlan::describe() const {
  if (const auto* c = std::get_if<ConstantTreatment>(&kind)) return fmt::format("constant(p={})", c->p);
  if (const auto* a = std::get_if<AlternatingTreatment>(&kind)) {
    return fmt::format("alternating(u_b={}, on={}d, off={}d)", a->u_b, a->on_days, a->off_days);
  }
  if (std::holds_alternative<ExternalTreatment>(kind)) return "external control";
  return "none";
}

// ----------------------------------------------------------------- simulation

std::optional<double> detect_treatment_start(const ExtendedTrajectory& traj, double m1, double eta,
                                             double start_fraction) {
  if (traj.empty()) return std::nullopt;
  const double threshold = start_fraction / m1;
  auto burden = [&](const ode::Vec<4>& y) { return y[0] + eta * y[1]; };
  if (burden(traj.states.front()) >= threshold) return traj.times.front();
  for (std::size_t i = 1; i < traj.size(); ++i) {
    if (burden(traj.states[i]) < threshold) continue;
    double lo = traj.times[i - 1], hi = traj.times[i];
    while (hi - lo > 1e-9) {
      const double mid = 0.5 * (lo + hi);
      if (burden(ode::sample(traj, mid)) >= threshold) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }
  return std::nullopt;
}

namespace {

template <class ControlFn>
ExtendedTrajectory integrate_segment(const ModelParams& params, const ode::Vec<4>& y0, double a, double b,
                                     ControlFn&& control, std::span<const double> grid,
                                     const ode::IntegratorConfig& cfg) {
  auto rhs = [&](double t, const ode::Vec<4>& y) {
    return rhs_extended(StateExtended::from_array(y), params, control(t)).to_array();
  };
  auto traj = ode::integrate<4>(rhs, y0, a, b, cfg, grid, NonNegativeGuard{});
  traj.controls.resize(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) traj.controls[i] = control(traj.times[i]);
  return traj;
}

class OutputGrid {
public:
  OutputGrid(double t_f, double step) {
    if (!(step > 0.0)) throw ValidationError({fmt::format("output step must be > 0, got {}", step)});
    const auto count = static_cast<std::size_t>(std::floor(t_f / step + 1e-9));
    for (std::size_t k = 0; k <= count; ++k) nodes_.push_back(static_cast<double>(k) * step);
    if (t_f - nodes_.back() > 1e-9) {
      nodes_.push_back(t_f);
    } else {
      nodes_.back() = t_f;
    }
  }

  const std::vector<double>& all() const { return nodes_; }

  /// a, the base nodes strictly inside (a, b), and b.
  std::vector<double> segment(double a, double b) const {
    std::vector<double> g{a};
    for (double t : nodes_) {
      if (t > a + 1e-9 && t < b - 1e-9) g.push_back(t);
    }
    g.push_back(b);
    return g;
  }

private:
  std::vector<double> nodes_;
};

void validate_inputs(const ModelParams& params, const DietInit& init, const TreatmentPlan& plan, double t_f) {
  auto v = params.violations();
  for (auto& s : init.violations()) v.push_back(std::move(s));
  for (auto& s : plan.violations()) v.push_back(std::move(s));
  if (!(t_f > 0.0)) v.push_back(fmt::format("t_f must be > 0, got {}", t_f));
  if (!v.empty()) throw ValidationError(std::move(v));
}

}  // namespace

ExtendedTrajectory simulate_constant(const ModelParams& params, const StateExtended& y0, double u,
                                     const std::vector<double>& times, const ode::IntegratorConfig& integrator) {
  if (times.size() < 2) throw DomainError("simulate_constant: need at least two sample times");
  return integrate_segment(params, y0.to_array(), times.front(), times.back(), [u](double) { return u; }, times,
                           integrator);
}

TreatedRun simulate_treated(const ModelParams& params, const DietInit& init, const TreatmentPlan& plan, double t_f,
                            const SimulationOptions& options) {
  validate_inputs(params, init, plan, t_f);
  const auto& cfg = options.integrator;
  const OutputGrid grid(t_f, options.output_step);
  const StateExtended start{init.S0, init.R0, init.E0, init.F0};
  auto untreated = [](double) { return 0.0; };

  TreatedRun out;
  auto detection = integrate_segment(params, start.to_array(), 0.0, t_f, untreated, grid.all(), cfg);
  out.t_tr = detect_treatment_start(detection, params.m1, params.eta, plan.start_fraction);
  if (!out.t_tr || *out.t_tr >= t_f) {
    out.trajectory = std::move(detection);
    out.state_at_start = start;
    return out;
  }
  const double t_tr = *out.t_tr;

  ode::Vec<4> y = start.to_array();
  auto run = [&](double a, double b, auto&& control) {
    const auto g = grid.segment(a, b);
    auto seg = integrate_segment(params, y, a, b, control, g, cfg);
    y = seg.states.back();
    out.trajectory.append(seg);
  };

  if (t_tr > 0.0) run(0.0, t_tr, untreated);
  out.state_at_start = StateExtended::from_array(y);

  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, NoTreatment>) {
          run(t_tr, t_f, untreated);
        } else if constexpr (std::is_same_v<K, ConstantTreatment>) {
          const double u = control_from_factor(k.p);
          run(t_tr, t_f, [u](double) { return u; });
        } else if constexpr (std::is_same_v<K, AlternatingTreatment>) {
          const double period = k.on_days + k.off_days;
          const double ub = k.u_b;
          for (std::size_t cycle = 0;; ++cycle) {
            const double on_start = t_tr + static_cast<double>(cycle) * period;
            if (on_start >= t_f - 1e-9) break;
            const double on_end = std::min(on_start + k.on_days, t_f);
            run(on_start, on_end, [ub](double) { return ub; });
            if (on_end >= t_f - 1e-9) break;
            run(on_end, std::min(on_start + period, t_f), untreated);
          }
        } else {
          const ControlGrid& c = k.control;
          auto control = [&c](double t) { return std::clamp(c.at(t), 0.0, 1.0); };
          std::vector<double> g{t_tr};
          for (double t : c.times) {
            if (t > t_tr + 1e-9 && t < t_f - 1e-9) g.push_back(t);
          }
          g.push_back(t_f);
          auto seg = integrate_segment(params, y, t_tr, t_f, control, g, cfg);
          out.trajectory.append(seg);
        }
      },
      plan.kind);
  return out;
}

// ------------------------------------------------------------------ scenarios

ModelParams ScenarioPreset::params(ModelParams base) const {
  base.a2 = a2;
  base.a3 = a3;
  base.k2 = k2;
  base.k3 = k3_fraction * base.k1;
  return base;
}

DietInit ScenarioPreset::init(Diet diet) const {
  DietInit d = DietInit::table(diet);
  d.S0 = S0;
  d.R0 = R0;
  return d;
}

const std::vector<ScenarioPreset>& scenario_presets() {
  static const std::vector<ScenarioPreset> presets{
      {"I-a", 20.0, 1.0, 0.045, 0.5, 1.0, 0.0},
      {"I-b", 20.0, 1.0, 0.045, 0.5, 0.75, 0.25},
      {"II", 10.0, 1.0, 0.045, 0.5, 1.0, 0.0},
      {"III", 10.0, 10.0, 0.045, 0.25, 1.0, 0.0},
  };
  return presets;
}

const ScenarioPreset& find_preset(std::string_view name) {
  for (const auto& p : scenario_presets()) {
    if (p.name == name) return p;
  }
  throw ValidationError({fmt::format("unknown scenario '{}' (expected I-a, I-b, II or III)", name)});
}

ScenarioSummary summarize(const TreatedRun& run) {
  ScenarioSummary s;
  s.t_tr = run.t_tr;
  const auto& last = run.trajectory.states.back();
  s.S_final = last[0];
  s.R_final = last[1];
  s.R_at_start = run.state_at_start.R;
  s.burden_at_start = run.state_at_start.S + run.state_at_start.R;
  s.eradicated = s.S_final + s.R_final < kEradicationThreshold;
  return s;
}

ScenarioRun run_scenario(const ScenarioPreset& preset, Diet diet, const TreatmentPlan& plan, double t_f,
                         const SimulationOptions& options) {
  ScenarioRun out;
  out.params = preset.params();
  out.init = preset.init(diet);
  out.run = simulate_treated(out.params, out.init, plan, t_f, options);
  out.summary = summarize(out.run);
  return out;
}

}  // namespace estrocon
