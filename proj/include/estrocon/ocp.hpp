#pragma once

// Optimal aromatase-inhibitor schedule by the forward-backward sweep.
//
// Minimises J(u) = integral of w_S*S + w_R*R + w_u/2*u^2 over [t_tr, t_f]
// subject to the extended model with control u in [lower, upper].

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "estrocon/control.hpp"
#include "estrocon/model.hpp"
#include "estrocon/ode.hpp"
#include "estrocon/treatment.hpp"

namespace estrocon {

struct OcpWeights {
  double w_S = 1.0;
  double w_R = 1.0;
  double w_u = 1.0;

  std::vector<std::string> violations() const;
};

/// Multipliers paired with (S, R, E, F).
struct AdjointState {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double l4 = 0.0;

  std::array<double, 4> to_array() const { return {l1, l2, l3, l4}; }
  static AdjointState from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
};

using AdjointTrajectory = ode::Trajectory<4>;

/// Composite Simpson rule on `count` equally spaced samples (3/8 rule on the
/// last three panels when the panel count is odd). Needs at least 3 samples.
double simpson(std::span<const double> values, double h);

/// Cost of a trajectory that carries control samples on a uniform grid.
double cost(const ExtendedTrajectory& traj, const OcpWeights& w);

/// Adjoint time derivatives, i.e. minus the state gradient of the Hamiltonian.
AdjointState adjoint_rhs(const StateExtended& x, const AdjointState& lambda, double u, const ModelParams& params,
                         const OcpWeights& w);

/// Pointwise minimiser of the Hamiltonian, clamp(r*F*lambda3/w_u, lower, upper).
double project_control(double lambda3, double F, const ModelParams& params, double w_u, double lower = 0.0,
                       double upper = 0.99);

struct FbsOptions {
  std::size_t grid_nodes = 2001;
  double lower = 0.0;
  double upper = 0.99;
  double tolerance = 1e-5;
  std::size_t max_iterations = 500;
  std::vector<double> step_weights = default_step_weights();
  // Tighter than the simulation default: line-search cost differences near
  // convergence are far below 1e-8 relative.
  ode::IntegratorConfig integrator{.rtol = 1e-10, .atol = 1e-12, .initial_step = std::nullopt};
  unsigned threads = 1;

  static std::vector<double> default_step_weights();  // 0.05, 0.10, ..., 1.0
  std::vector<std::string> violations() const;
};

struct FbsReport {
  std::size_t iterations = 0;
  double initial_J = 0.0;                  // cost of the initial guess u = 0
  std::vector<double> J_history;           // cost after each accepted update
  std::vector<double> s_history;           // chosen convex-combination weight
  std::vector<double> rel_error_history;   // max relative change per iteration
  std::vector<std::size_t> stagnant_iterations;
  bool converged = false;
  bool stagnated = false;
  double final_rel_error = 0.0;
};

struct FbsResult {
  ControlGrid control;
  ExtendedTrajectory states;     // controls recorded per node
  AdjointTrajectory adjoints;
  double J = 0.0;
  FbsReport report;
};

/// Forward-backward sweep from state x_tr at t_tr to t_f, starting from u = 0.
/// Returns the best iterate (lowest J) when the iteration budget runs out.
FbsResult fbs_solve(const ModelParams& params, const StateExtended& x_tr, double t_tr, double t_f,
                    const OcpWeights& w, const FbsOptions& options = {});

/// Untreated run up to the treatment start followed by the optimal control.
struct OcpScenarioRun {
  ModelParams params;
  DietInit init;
  double t_tr = 0.0;
  StateExtended state_at_start;
  ExtendedTrajectory untreated;  // [0, t_tr]
  FbsResult solution;            // [t_tr, t_f]

  /// Both phases on one time axis (u = 0 before t_tr).
  ExtendedTrajectory combined() const;
};

/// Throws DomainError when the tumor never reaches the treatment threshold.
OcpScenarioRun solve_scenario_ocp(const ScenarioPreset& preset, Diet diet, const OcpWeights& w, double t_f = 25.0,
                                  const FbsOptions& options = {}, const SimulationOptions& sim = {});

}  // namespace estrocon
