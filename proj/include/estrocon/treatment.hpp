#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "estrocon/control.hpp"
#include "estrocon/model.hpp"
#include "estrocon/ode.hpp"

namespace estrocon {

using ExtendedTrajectory = ode::Trajectory<4>;

struct NoTreatment {};

/// Estrogen production scaled by p for the whole treatment period.
struct ConstantTreatment {
  double p = 1.0;
};

/// u = u_b for on_days, then u = 0 for off_days, repeating from the start of
/// treatment; the final phase is truncated at t_f.
struct AlternatingTreatment {
  double u_b = 0.99;
  double on_days = 1.0;
  double off_days = 1.0;
};

/// Replays a precomputed control (for example an optimal one).
struct ExternalTreatment {
  ControlGrid control;
};

struct TreatmentPlan {
  std::variant<NoTreatment, ConstantTreatment, AlternatingTreatment, ExternalTreatment> kind;
  /// Treatment starts once S + eta*R reaches start_fraction / m1.
  double start_fraction = 0.25;

  std::vector<std::string> violations() const;
  /// "none", "constant:<p>", "alternating:<u_b>:<on>:<off>",
  /// "alternating-short" (1 day on/off) or "alternating-long" (2 days on/off).
  static TreatmentPlan parse(std::string_view text);
  std::string describe() const;
};

struct SimulationOptions {
  ode::IntegratorConfig integrator;
  double output_step = 0.01;  // days between output nodes
};

/// First time S + eta*R reaches start_fraction / m1, located to 1e-6 days on
/// the dense output. Returns 0 when the threshold is already met at the first
/// node and nothing when it is never reached.
std::optional<double> detect_treatment_start(const ExtendedTrajectory& untreated, double m1, double eta,
                                             double start_fraction = 0.25);

struct TreatedRun {
  ExtendedTrajectory trajectory;  // controls are recorded per node
  std::optional<double> t_tr;
  StateExtended state_at_start;   // state at t_tr (or at t = 0 when untreated)
};

/// Untreated until the start rule fires, then the plan's control until t_f.
/// Every control switch restarts the integration at the switch time.
TreatedRun simulate_treated(const ModelParams& params, const DietInit& init, const TreatmentPlan& plan, double t_f,
                            const SimulationOptions& options = {});

/// Extended model with constant control u from t = 0, sampled at `times`
/// (which must start at or after 0 and be increasing).
ExtendedTrajectory simulate_constant(const ModelParams& params, const StateExtended& y0, double u,
                                     const std::vector<double>& times, const ode::IntegratorConfig& integrator);

struct ScenarioPreset {
  std::string name;
  double a2 = 20.0;
  double a3 = 1.0;
  double k2 = 0.045;
  double k3_fraction = 0.5;  // k3 = k3_fraction * k1
  double S0 = 1.0;
  double R0 = 0.0;

  ModelParams params(ModelParams base = {}) const;
  DietInit init(Diet diet) const;
};

const std::vector<ScenarioPreset>& scenario_presets();
/// Throws ValidationError for unknown names.
const ScenarioPreset& find_preset(std::string_view name);

/// Eradication means S + R below the size of the initial inoculum.
inline constexpr double kEradicationThreshold = 1.0;

struct ScenarioSummary {
  std::optional<double> t_tr;
  double S_final = 0.0;
  double R_final = 0.0;
  double R_at_start = 0.0;
  double burden_at_start = 0.0;
  bool eradicated = false;
};

struct ScenarioRun {
  ModelParams params;
  DietInit init;
  TreatedRun run;
  ScenarioSummary summary;
};

ScenarioSummary summarize(const TreatedRun& run);

ScenarioRun run_scenario(const ScenarioPreset& preset, Diet diet, const TreatmentPlan& plan, double t_f = 25.0,
                         const SimulationOptions& options = {});

}  // namespace estrocon
