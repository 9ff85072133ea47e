#include "estrocon/cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include "estrocon/calibration.hpp"
#include "estrocon/csv.hpp"
#include "estrocon/error.hpp"
#include "estrocon/sensitivity.hpp"
#include "estrocon/treatment.hpp"

namespace estrocon::cli {

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Calibrate: return "calibrate";
    case Command::Treat: return "treat";
    case Command::Ocp: return "ocp";
    case Command::Prcc: return "prcc";
    case Command::Fatvol: return "fatvol";
  }
  return "?";
}

std::vector<std::string> RunConfig::violations() const {
  std::vector<std::string> v;
  auto check = [&](bool ok, std::string msg) {
    if (!ok) v.push_back(std::move(msg));
  };
  check(diet == "CD" || diet == "HFD", fmt::format("--diet must be CD or HFD, got '{}'", diet));
  const bool uses_scenario = command == Command::Treat || command == Command::Ocp ||
                             (command == Command::Simulate && model == "extended");
  if (uses_scenario) {
    bool known = false;
    for (const auto& p : scenario_presets()) known = known || p.name == scenario;
    check(known, fmt::format("--scenario must be one of I-a, I-b, II, III, got '{}'", scenario));
  }
  if (command == Command::Simulate) {
    check(model == "basic" || model == "extended", fmt::format("--model must be basic or extended, got '{}'", model));
  }
  if (command == Command::Treat) {
    try {
      TreatmentPlan::parse(plan);
    } catch (const ValidationError& e) {
      v.insert(v.end(), e.violations.begin(), e.violations.end());
    }
  }
  if (command == Command::Ocp) {
    for (auto& s : weights.violations()) v.push_back(s);
    check(u_lower >= 0.0 && u_lower <= u_upper && u_upper <= 1.0,
          fmt::format("control bounds must satisfy 0 <= u_a <= u_b <= 1, got [{}, {}]", u_lower, u_upper));
    check(grid_nodes >= 3, fmt::format("--grid must be >= 3, got {}", grid_nodes));
    check(max_iterations >= 1, "--max-iter must be >= 1");
  }
  check(t_f > 0.0, fmt::format("--t_f must be > 0, got {}", t_f));
  check(output_step > 0.0, fmt::format("--output-step must be > 0, got {}", output_step));
  if (rtol) check(*rtol > 0.0, fmt::format("--rtol must be > 0, got {}", *rtol));
  if (atol) check(*atol > 0.0, fmt::format("--atol must be > 0, got {}", *atol));
  check(threads >= 1, "--threads must be >= 1");
  if (command == Command::Prcc) {
    check(samples >= 3, fmt::format("--n must be >= 3, got {}", samples));
    bool ordered = !days.empty();
    for (std::size_t i = 0; i < days.size(); ++i) {
      ordered = ordered && days[i] > 0.0 && (i == 0 || days[i] > days[i - 1]);
    }
    check(ordered, "--days must be positive and strictly increasing");
  }
  if (command == Command::Calibrate) {
    check(std::filesystem::is_regular_file(data), fmt::format("--data file '{}' does not exist", data));
  }
  if (command == Command::Fatvol) {
    check(fat_n >= 0.0, fmt::format("--n must be >= 0, got {}", fat_n));
    check(fat_d > 0.0, fmt::format("--d must be > 0, got {}", fat_d));
    check(fat_V >= 0.0, fmt::format("--V must be >= 0, got {}", fat_V));
  }
  if (label) {
    check(!label->empty() && label->find('/') == std::string::npos && *label != "." && *label != "..",
          fmt::format("--label must be a plain directory name, got '{}'", *label));
  }
  return v;
}

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;
  CLI::App app{"Estrogen-driven tumor growth: simulation, calibration, treatment and sensitivity."};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI file; keys in [<command>] sections set that command's flags");
  app.require_subcommand(1, 1);

  auto common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "Output root directory");
    sub->add_option("--label", cfg.label, "Run directory name (default: timestamp)");
    sub->add_option("--threads", cfg.threads, "Worker threads (1 = fully deterministic)");
    sub->add_option("--seed", cfg.seed, "Top-level random seed");
    sub->add_option("--rtol", cfg.rtol, "Integrator relative tolerance");
    sub->add_option("--atol", cfg.atol, "Integrator absolute tolerance");
    sub->add_option("--t_f", cfg.t_f, "Final time, days");
  };

  auto* simulate = app.add_subcommand("simulate", "Untreated simulation (basic or extended model)");
  common(simulate);
  simulate->add_option("--diet", cfg.diet, "CD or HFD");
  simulate->add_option("--model", cfg.model, "basic or extended");
  simulate->add_option("--scenario", cfg.scenario, "Preset for the extended model");
  simulate->add_option("--output-step", cfg.output_step, "Days between output rows");

  auto* calibrate = app.add_subcommand("calibrate", "Two-step fit to a measurement CSV");
  common(calibrate);
  calibrate->add_option("--data", cfg.data, "Measurement CSV");

  auto* treat = app.add_subcommand("treat", "Constant or alternating treatment of a scenario");
  common(treat);
  treat->add_option("--diet", cfg.diet, "CD or HFD");
  treat->add_option("--scenario", cfg.scenario, "I-a, I-b, II or III");
  treat->add_option("--plan", cfg.plan, "none | constant:<p> | alternating:<u_b>:<on>:<off> | alternating-short | alternating-long");
  treat->add_option("--output-step", cfg.output_step, "Days between output rows");

  auto* ocp = app.add_subcommand("ocp", "Optimal treatment by forward-backward sweep");
  common(ocp);
  ocp->add_option("--diet", cfg.diet, "CD or HFD");
  ocp->add_option("--scenario", cfg.scenario, "I-a, I-b, II or III");
  ocp->add_option("--w_S", cfg.weights.w_S, "Weight of sensitive cells");
  ocp->add_option("--w_R", cfg.weights.w_R, "Weight of resistant cells");
  ocp->add_option("--w_u", cfg.weights.w_u, "Weight of the control");
  ocp->add_option("--u_a", cfg.u_lower, "Lower control bound");
  ocp->add_option("--u_b", cfg.u_upper, "Upper control bound");
  ocp->add_option("--grid", cfg.grid_nodes, "Grid nodes on [t_tr, t_f]");
  ocp->add_option("--max-iter", cfg.max_iterations, "Sweep iteration limit");
  ocp->add_option("--output-step", cfg.output_step, "Days between output rows before treatment");

  auto* prcc = app.add_subcommand("prcc", "LHS-PRCC sensitivity study");
  common(prcc);
  prcc->add_option("--diet", cfg.diet, "CD or HFD");
  prcc->add_option("--n", cfg.samples, "Design size");
  prcc->add_option("--days", cfg.days, "Observation days")->delimiter(',');

  auto* fatvol = app.add_subcommand("fatvol", "Fat amount from adipocyte geometry");
  common(fatvol);
  fatvol->add_option("--n", cfg.fat_n, "Adipocytes per mm^2")->required();
  fatvol->add_option("--d", cfg.fat_d, "Adipocyte diameter, mm")->required();
  fatvol->add_option("--V", cfg.fat_V, "Tissue cube volume, mm^3")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help(), kExitOk);
  } catch (const CLI::CallForAllHelp&) {
    throw UsageError(app.help("", CLI::AppFormatMode::All), kExitOk);
  } catch (const CLI::ParseError& e) {
    throw UsageError(fmt::format("{}\nRun with --help for usage.", e.what()), kExitValidation);
  }

  const std::pair<CLI::App*, Command> table[] = {{simulate, Command::Simulate}, {calibrate, Command::Calibrate},
                                                  {treat, Command::Treat},       {ocp, Command::Ocp},
                                                  {prcc, Command::Prcc},         {fatvol, Command::Fatvol}};
  for (const auto& [sub, command] : table) {
    if (sub->parsed()) cfg.command = command;
  }
  if (auto* opt = app.get_config_ptr(); opt != nullptr && opt->count() > 0) cfg.config_file = opt->as<std::string>();

  auto v = cfg.violations();
  if (!v.empty()) throw ValidationError(std::move(v));
  return cfg;
}

std::filesystem::path output_directory(const RunConfig& config) {
  std::string leaf;
  if (config.label) {
    leaf = *config.label;
  } else {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    leaf = fmt::format("{:%Y%m%d-%H%M%S}-{:03d}", fmt::localtime(std::chrono::system_clock::to_time_t(now)), ms);
  }
  return std::filesystem::path(config.out) / std::string(to_string(config.command)) / leaf;
}

namespace {

ode::IntegratorConfig integrator_for(const RunConfig& c, ode::IntegratorConfig base) {
  if (c.rtol) base.rtol = *c.rtol;
  if (c.atol) base.atol = *c.atol;
  return base;
}

/// Collects "key: value" lines for stdout and summary.txt.
class Summary {
public:
  template <class... Args>
  void add(std::string_view key, fmt::format_string<Args...> f, Args&&... args) {
    text_ += fmt::format("{}: {}\n", key, fmt::format(f, std::forward<Args>(args)...));
  }
  void section(std::string_view name) { text_ += fmt::format("[{}]\n", name); }
  const std::string& text() const { return text_; }

private:
  std::string text_;
};

void describe_config(Summary& s, const RunConfig& c, const ode::IntegratorConfig& integ) {
  s.section("config");
  s.add("command", "{}", to_string(c.command));
  if (c.config_file) s.add("config_file", "{}", *c.config_file);
  s.add("t_f", "{}", c.t_f);
  s.add("rtol", "{}", integ.rtol);
  s.add("atol", "{}", integ.atol);
  s.add("seed", "{}", c.seed);
  s.add("threads", "{}", c.threads);
  switch (c.command) {
    case Command::Simulate:
      s.add("diet", "{}", c.diet);
      s.add("model", "{}", c.model);
      if (c.model == "extended") s.add("scenario", "{}", c.scenario);
      s.add("output_step", "{}", c.output_step);
      break;
    case Command::Calibrate:
      s.add("data", "{}", c.data);
      break;
    case Command::Treat:
      s.add("diet", "{}", c.diet);
      s.add("scenario", "{}", c.scenario);
      s.add("plan", "{}", c.plan);
      s.add("output_step", "{}", c.output_step);
      break;
    case Command::Ocp:
      s.add("diet", "{}", c.diet);
      s.add("scenario", "{}", c.scenario);
      s.add("w_S", "{}", c.weights.w_S);
      s.add("w_R", "{}", c.weights.w_R);
      s.add("w_u", "{}", c.weights.w_u);
      s.add("u_a", "{}", c.u_lower);
      s.add("u_b", "{}", c.u_upper);
      s.add("grid", "{}", c.grid_nodes);
      s.add("max_iter", "{}", c.max_iterations);
      break;
    case Command::Prcc:
      s.add("diet", "{}", c.diet);
      s.add("n", "{}", c.samples);
      s.add("days", "{}", fmt::join(c.days, ","));
      break;
    case Command::Fatvol:
      s.add("n", "{}", c.fat_n);
      s.add("d", "{}", c.fat_d);
      s.add("V", "{}", c.fat_V);
      break;
  }
}

template <class Writer>
void emit(const std::filesystem::path& dir, const std::string& name, Writer&& writer) {
  std::ostringstream os;
  writer(os);
  csv::write_file((dir / name).string(), os.str());
}

std::filesystem::path prepare(const RunConfig& c) {
  const auto dir = output_directory(c);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  return dir;
}

int finish(const std::filesystem::path& dir, Summary& s, std::ostream& out, int code) {
  s.add("output_dir", "{}", dir.string());
  csv::write_file((dir / "summary.txt").string(), s.text());
  out << s.text();
  return code;
}

int run_simulate(const RunConfig& c, std::ostream& out) {
  const Diet diet = parse_diet(c.diet);
  const auto integ = integrator_for(c, {});
  Summary s;
  describe_config(s, c, integ);
  const auto dir = prepare(c);
  s.section("result");
  if (c.model == "basic") {
    const ModelParams p;
    const DietInit init = DietInit::table(diet);
    std::vector<double> grid;
    for (std::size_t k = 0;; ++k) {
      const double t = static_cast<double>(k) * c.output_step;
      if (t >= c.t_f - 1e-9) break;
      grid.push_back(t);
    }
    grid.push_back(c.t_f);
    auto rhs = [&](double, const ode::Vec<3>& y) { return rhs_basic(StateBasic::from_array(y), p).to_array(); };
    const auto traj = ode::integrate<3>(rhs, StateBasic{init.T0, init.E0, init.F0}.to_array(), 0.0, c.t_f, integ,
                                        grid, NonNegativeGuard{});
    emit(dir, "trajectory.csv", [&](std::ostream& os) { csv::write_basic_trajectory(os, traj); });
    const auto& y = traj.states.back();
    s.add("T_final", "{:.9g}", y[0]);
    s.add("E_final", "{:.9g}", y[1]);
    s.add("F_final", "{:.9g}", y[2]);
  } else {
    const auto& preset = find_preset(c.scenario);
    TreatmentPlan none;
    const auto run = simulate_treated(preset.params(), preset.init(diet), none, c.t_f, {integ, c.output_step});
    emit(dir, "trajectory.csv", [&](std::ostream& os) { csv::write_trajectory(os, run.trajectory); });
    const auto& y = run.trajectory.states.back();
    s.add("t_tr", "{}", run.t_tr ? fmt::format("{:.9g}", *run.t_tr) : std::string("none"));
    s.add("S_final", "{:.9g}", y[0]);
    s.add("R_final", "{:.9g}", y[1]);
    s.add("tumor_final", "{:.9g}", y[0] + y[1]);
  }
  return finish(dir, s, out, kExitOk);
}

int run_calibrate(const RunConfig& c, std::ostream& out) {
  const auto data = load_measurements(c.data);
  SimplexOptions opt;
  opt.seed = c.seed + 1000;
  opt.threads = c.threads;
  const auto integ = integrator_for(c, {});
  Summary s;
  describe_config(s, c, integ);
  const auto dir = prepare(c);
  const ModelParams defaults;
  CalibrationResult r;
  r.step1 = fit_step1(data, defaults.m1, defaults.mu, {}, opt);
  SimplexOptions opt2 = opt;
  opt2.seed = opt.seed + 1;
  r.step2 = fit_step2(data, {r.step1.k1, r.step1.a1, r.step1.r_CD, r.step1.r_HFD, defaults.m1, defaults.mu}, {}, opt2,
                      integ);
  r.E0_CD = steady_state_estrogen(r.step1.r_CD, defaults.mu);
  r.E0_HFD = steady_state_estrogen(r.step1.r_HFD, defaults.mu);
  r.F0_CD = r.step1.r_CD / r.step2.r;
  r.F0_HFD = r.step1.r_HFD / r.step2.r;
  const csv::KeyValues kv{{"k1", r.step1.k1},     {"a1", r.step1.a1},   {"r_CD", r.step1.r_CD},
                          {"r_HFD", r.step1.r_HFD}, {"step1_residual", r.step1.residual},
                          {"r", r.step2.r},       {"alpha", r.step2.alpha}, {"step2_residual", r.step2.residual},
                          {"E0_CD", r.E0_CD},     {"E0_HFD", r.E0_HFD}, {"F0_CD", r.F0_CD},
                          {"F0_HFD", r.F0_HFD}};
  emit(dir, "calibration.csv", [&](std::ostream& os) { csv::write_key_values(os, kv); });
  s.section("result");
  for (const auto& [k, v] : kv) s.add(k, "{:.9g}", v);
  std::vector<std::string> bound = r.step1.at_bound;
  bound.insert(bound.end(), r.step2.at_bound.begin(), r.step2.at_bound.end());
  s.add("at_bound", "{}", bound.empty() ? std::string("none") : fmt::format("{}", fmt::join(bound, ",")));
  s.add("converged", "{}", r.step1.converged && r.step2.converged);
  return finish(dir, s, out, kExitOk);
}

int run_treat(const RunConfig& c, std::ostream& out) {
  const Diet diet = parse_diet(c.diet);
  const auto plan = TreatmentPlan::parse(c.plan);
  const auto integ = integrator_for(c, {});
  Summary s;
  describe_config(s, c, integ);
  const auto dir = prepare(c);
  const auto run = run_scenario(find_preset(c.scenario), diet, plan, c.t_f, {integ, c.output_step});
  emit(dir, "trajectory.csv", [&](std::ostream& os) { csv::write_trajectory(os, run.run.trajectory); });
  const auto& sum = run.summary;
  s.section("result");
  s.add("plan", "{}", plan.describe());
  s.add("t_tr", "{}", sum.t_tr ? fmt::format("{:.9g}", *sum.t_tr) : std::string("none"));
  s.add("S_final", "{:.9g}", sum.S_final);
  s.add("R_final", "{:.9g}", sum.R_final);
  s.add("tumor_final", "{:.9g}", sum.S_final + sum.R_final);
  s.add("R_at_start", "{:.9g}", sum.R_at_start);
  s.add("eradicated", "{}", sum.eradicated);
  return finish(dir, s, out, kExitOk);
}

int run_ocp(const RunConfig& c, std::ostream& out) {
  const Diet diet = parse_diet(c.diet);
  FbsOptions opt;
  opt.grid_nodes = c.grid_nodes;
  opt.lower = c.u_lower;
  opt.upper = c.u_upper;
  opt.max_iterations = c.max_iterations;
  opt.threads = c.threads;
  opt.integrator = integrator_for(c, opt.integrator);
  Summary s;
  describe_config(s, c, opt.integrator);
  const auto dir = prepare(c);
  const auto run = solve_scenario_ocp(find_preset(c.scenario), diet, c.weights, c.t_f, opt,
                                      {integrator_for(c, {}), c.output_step});
  const auto& sol = run.solution;
  emit(dir, "ocp_trajectory.csv", [&](std::ostream& os) { csv::write_trajectory(os, run.combined()); });
  emit(dir, "ocp_report.csv", [&](std::ostream& os) { csv::write_ocp_report(os, sol.report); });
  const auto& y = sol.states.states.back();
  s.section("result");
  s.add("t_tr", "{:.9g}", run.t_tr);
  s.add("S_final", "{:.9g}", y[0]);
  s.add("R_final", "{:.9g}", y[1]);
  s.add("tumor_final", "{:.9g}", y[0] + y[1]);
  s.add("J", "{:.9g}", sol.J);
  s.add("iterations", "{}", sol.report.iterations);
  s.add("final_rel_error", "{:.3g}", sol.report.final_rel_error);
  s.add("converged", "{}", sol.report.converged);
  s.add("stagnated_iterations", "{}", sol.report.stagnant_iterations.size());
  return finish(dir, s, out, sol.report.converged ? kExitOk : kExitNonConvergence);
}

int run_prcc(const RunConfig& c, std::ostream& out) {
  const Diet diet = parse_diet(c.diet);
  PrccStudyOptions opt;
  opt.days = c.days;
  opt.n = c.samples;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.integrator = integrator_for(c, {});
  Summary s;
  describe_config(s, c, opt.integrator);
  const auto dir = prepare(c);
  const auto report = run_prcc_study(prcc_baseline(), diet, opt);
  const std::string name = fmt::format("prcc_{}.csv", c.diet);
  emit(dir, name, [&](std::ostream& os) { csv::write_prcc(os, report); });
  std::size_t undefined = 0;
  for (const auto& cell : report.cells) undefined += cell.value ? 0 : 1;
  s.section("result");
  s.add("rows", "{}", report.cells.size());
  s.add("failed_simulations", "{}", report.failures.size());
  s.add("n_effective", "{}", report.n_samples - report.failures.size());
  s.add("undefined_cells", "{}", undefined);
  return finish(dir, s, out, kExitOk);
}

int run_fatvol(const RunConfig& c, std::ostream& out) {
  out << csv::number(fat_volume_estimate({c.fat_n, c.fat_d, c.fat_V})) << '\n';
  return kExitOk;
}

}  // namespace

int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    switch (c.command) {
      case Command::Simulate: return run_simulate(c, out);
      case Command::Calibrate: return run_calibrate(c, out);
      case Command::Treat: return run_treat(c, out);
      case Command::Ocp: return run_ocp(c, out);
      case Command::Prcc: return run_prcc(c, out);
      case Command::Fatvol: return run_fatvol(c, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitValidation;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = parse_config(args);
  } catch (const UsageError& e) {
    (e.exit_code == kExitOk ? out : err) << e.what() << '\n';
    return e.exit_code;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return run(cfg, out, err);
}

}  // namespace estrocon::cli
