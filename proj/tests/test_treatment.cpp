#include <gtest/gtest.h>

#include <cmath>
#include <variant>

#include "estrocon/error.hpp"
#include "estrocon/model.hpp"
#include "estrocon/ode.hpp"
#include "estrocon/treatment.hpp"

using namespace estrocon;

namespace {

constexpr double kTf = 25.0;

std::size_t first_index_after(const ExtendedTrajectory& traj, double t) {
  std::size_t i = 0;
  while (i < traj.size() && traj.times[i] <= t) ++i;
  return i;
}

}  // namespace

TEST(TreatmentPlan, ParsesEveryForm) {
  EXPECT_TRUE(std::holds_alternative<NoTreatment>(TreatmentPlan::parse("none").kind));

  const auto c = TreatmentPlan::parse("constant:0.0125");
  ASSERT_TRUE(std::holds_alternative<ConstantTreatment>(c.kind));
  EXPECT_DOUBLE_EQ(std::get<ConstantTreatment>(c.kind).p, 0.0125);

  const auto a = TreatmentPlan::parse("alternating:0.9:3:1.5");
  ASSERT_TRUE(std::holds_alternative<AlternatingTreatment>(a.kind));
  EXPECT_DOUBLE_EQ(std::get<AlternatingTreatment>(a.kind).u_b, 0.9);
  EXPECT_DOUBLE_EQ(std::get<AlternatingTreatment>(a.kind).on_days, 3.0);
  EXPECT_DOUBLE_EQ(std::get<AlternatingTreatment>(a.kind).off_days, 1.5);

  const auto s = std::get<AlternatingTreatment>(TreatmentPlan::parse("alternating-short").kind);
  EXPECT_DOUBLE_EQ(s.on_days, 1.0);
  EXPECT_DOUBLE_EQ(s.off_days, 1.0);
  EXPECT_DOUBLE_EQ(s.u_b, 0.99);
  const auto l = std::get<AlternatingTreatment>(TreatmentPlan::parse("alternating-long").kind);
  EXPECT_DOUBLE_EQ(l.on_days, 2.0);
  EXPECT_DOUBLE_EQ(l.off_days, 2.0);
}

TEST(TreatmentPlan, RejectsInvalidPlans) {
  EXPECT_THROW(TreatmentPlan::parse("constant:0"), ValidationError);
  EXPECT_THROW(TreatmentPlan::parse("constant:1.5"), ValidationError);
  EXPECT_THROW(TreatmentPlan::parse("alternating:1.0:1:1"), ValidationError);
  EXPECT_THROW(TreatmentPlan::parse("alternating:0.5:0:1"), ValidationError);
  EXPECT_THROW(TreatmentPlan::parse("weekly"), Error);
  EXPECT_THROW(TreatmentPlan::parse("constant:abc"), Error);
}

TEST(TreatmentPlan, DescribeNamesTheSettings) {
  EXPECT_EQ(TreatmentPlan::parse("none").describe(), "none");
  EXPECT_EQ(TreatmentPlan::parse("constant:0.025").describe(), "constant(p=0.025)");
  EXPECT_EQ(TreatmentPlan::parse("alternating:0.99:2:2").describe(), "alternating(u_b=0.99, on=2d, off=2d)");
}

TEST(ScenarioPresets, MatchDocumentedSettings) {
  const ModelParams base;
  const auto& ia = find_preset("I-a");
  EXPECT_DOUBLE_EQ(ia.a2, 20.0);
  EXPECT_DOUBLE_EQ(ia.a3, 1.0);
  EXPECT_DOUBLE_EQ(ia.params().k3, base.k1 / 2.0);
  EXPECT_DOUBLE_EQ(ia.R0, 0.0);

  const auto& ib = find_preset("I-b");
  EXPECT_DOUBLE_EQ(ib.S0, 0.75);
  EXPECT_DOUBLE_EQ(ib.R0, 0.25);
  EXPECT_DOUBLE_EQ(ib.init(Diet::HFD).R0, 0.25);

  const auto& ii = find_preset("II");
  EXPECT_DOUBLE_EQ(ii.a2, 10.0);
  EXPECT_DOUBLE_EQ(ii.a3, 1.0);

  const auto& iii = find_preset("III");
  EXPECT_DOUBLE_EQ(iii.a2, 10.0);
  EXPECT_DOUBLE_EQ(iii.a3, 10.0);
  EXPECT_DOUBLE_EQ(iii.params().k3, base.k1 / 4.0);

  EXPECT_THROW(find_preset("IV"), ValidationError);
}

TEST(DetectTreatmentStart, ThresholdIsQuarterCapacity) {
  // Linear ramp S = 100 t crosses 500 at t = 5.
  ExtendedTrajectory traj;
  for (int i = 0; i <= 10; ++i) {
    const double t = i;
    traj.times.push_back(t);
    traj.states.push_back({100.0 * t, 0.0, 1.0, 1.0});
    traj.slopes.push_back({100.0, 0.0, 0.0, 0.0});
  }
  const auto t_tr = detect_treatment_start(traj, 5e-4, 1.0);
  ASSERT_TRUE(t_tr.has_value());
  EXPECT_NEAR(*t_tr, 5.0, 1e-6);

  // Resistant cells count with weight eta.
  for (auto& y : traj.states) y[1] = y[0], y[0] = 0.0;
  for (auto& f : traj.slopes) f[1] = f[0], f[0] = 0.0;
  const auto half = detect_treatment_start(traj, 5e-4, 0.5);
  ASSERT_TRUE(half.has_value());
  EXPECT_NEAR(*half, 10.0, 1e-6);
}

TEST(DetectTreatmentStart, AlreadyAboveThresholdStartsAtZero) {
  const auto run = simulate_treated(ModelParams{}, DietInit{Diet::CD, 1.0, 600.0, 0.0, 175.143, 49.923},
                                    TreatmentPlan::parse("constant:0.5"), kTf);
  ASSERT_TRUE(run.t_tr.has_value());
  EXPECT_DOUBLE_EQ(*run.t_tr, 0.0);
}

TEST(DetectTreatmentStart, GrowthlessTumorNeverStarts) {
  ModelParams p;
  p.k1 = 0.0;
  p.k3 = 0.0;
  const auto run = simulate_treated(p, DietInit::table(Diet::CD), TreatmentPlan::parse("constant:0.01"), kTf);
  EXPECT_FALSE(run.t_tr.has_value());
  for (double u : run.trajectory.controls) EXPECT_EQ(u, 0.0);
}

TEST(SimulateTreated, NoPlanAndFullEstrogenMatchUntreated) {
  const auto& preset = find_preset("I-a");
  const auto params = preset.params();
  const auto init = preset.init(Diet::CD);
  const auto none = simulate_treated(params, init, TreatmentPlan::parse("none"), kTf);
  const auto p1 = simulate_treated(params, init, TreatmentPlan::parse("constant:1"), kTf);
  ASSERT_EQ(none.trajectory.size(), p1.trajectory.size());
  for (std::size_t i = 0; i < none.trajectory.size(); ++i) {
    EXPECT_DOUBLE_EQ(none.trajectory.times[i], p1.trajectory.times[i]);
    for (int k = 0; k < 4; ++k) {
      const double a = none.trajectory.states[i][k];
      const double b = p1.trajectory.states[i][k];
      EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a))) << "node " << i << " component " << k;
    }
  }
}

TEST(SimulateTreated, RecordsControlOnOutputGrid) {
  const auto run = run_scenario(find_preset("I-a"), Diet::CD, TreatmentPlan::parse("constant:0.0125"));
  const auto& traj = run.run.trajectory;
  ASSERT_EQ(traj.controls.size(), traj.size());
  EXPECT_DOUBLE_EQ(traj.times.front(), 0.0);
  EXPECT_DOUBLE_EQ(traj.times.back(), kTf);
  const double t_tr = *run.summary.t_tr;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.times[i] < t_tr) EXPECT_EQ(traj.controls[i], 0.0);
    if (traj.times[i] > t_tr) EXPECT_DOUBLE_EQ(traj.controls[i], 1.0 - 0.0125);
  }
}

TEST(RunScenario, ConstantTreatmentEradicatesScenarioIa) {
  for (Diet diet : {Diet::CD, Diet::HFD}) {
    for (double p : {0.0125, 0.01}) {
      ConstantTreatment c{p};
      const auto run = run_scenario(find_preset("I-a"), diet, TreatmentPlan{c});
      EXPECT_TRUE(run.summary.eradicated) << to_string(diet) << " p=" << p;
      EXPECT_LT(run.summary.S_final + run.summary.R_final, 0.01 * run.summary.burden_at_start);
    }
  }
}

TEST(RunScenario, HighFactorFailsForHighFatDiet) {
  const auto run = run_scenario(find_preset("I-a"), Diet::HFD, TreatmentPlan::parse("constant:0.025"));
  EXPECT_FALSE(run.summary.eradicated);
}

TEST(RunScenario, HighFatDietStartsEarlier) {
  const auto none = TreatmentPlan::parse("none");
  const auto cd = run_scenario(find_preset("I-a"), Diet::CD, none);
  const auto hfd = run_scenario(find_preset("I-a"), Diet::HFD, none);
  ASSERT_TRUE(cd.summary.t_tr && hfd.summary.t_tr);
  EXPECT_LT(*hfd.summary.t_tr, *cd.summary.t_tr);
}

TEST(RunScenario, ScenarioIIIDevelopsResistance) {
  const auto run = run_scenario(find_preset("III"), Diet::CD, TreatmentPlan::parse("constant:0.01"));
  EXPECT_GT(run.summary.R_final, 10.0 * run.summary.R_at_start);
}

TEST(SimulateTreated, EstrogenWeaklyIncreasingInFactor) {
  const auto& preset = find_preset("I-a");
  const std::vector<double> ps{1.0, 0.025, 0.0125, 0.01, 0.001};
  std::vector<ExtendedTrajectory> runs;
  for (double p : ps) {
    runs.push_back(simulate_treated(preset.params(), preset.init(Diet::CD), TreatmentPlan{ConstantTreatment{p}}, kTf)
                       .trajectory);
  }
  const auto t_tr =
      *simulate_treated(preset.params(), preset.init(Diet::CD), TreatmentPlan{}, kTf).t_tr;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    ASSERT_EQ(runs[k].size(), runs[k - 1].size());
    for (std::size_t i = first_index_after(runs[k], t_tr); i < runs[k].size(); ++i) {
      EXPECT_LE(runs[k].states[i][2], runs[k - 1].states[i][2] * (1.0 + 1e-9) + 1e-12)
          << "p=" << ps[k] << " t=" << runs[k].times[i];
    }
  }
}

TEST(SimulateTreated, AlternatingSwitchesAtPhaseBoundaries) {
  const auto& preset = find_preset("I-a");
  const auto run =
      simulate_treated(preset.params(), preset.init(Diet::CD), TreatmentPlan::parse("alternating:0.99:1:1"), kTf);
  ASSERT_TRUE(run.t_tr.has_value());
  const double t_tr = *run.t_tr;
  const auto& traj = run.trajectory;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    if (t <= t_tr) continue;
    const double phase = std::fmod(t - t_tr, 2.0);
    if (phase > 1e-6 && phase < 1.0 - 1e-6) EXPECT_DOUBLE_EQ(traj.controls[i], 0.99) << t;
    if (phase > 1.0 + 1e-6 && phase < 2.0 - 1e-6) EXPECT_DOUBLE_EQ(traj.controls[i], 0.0) << t;
  }
  EXPECT_DOUBLE_EQ(traj.times.back(), kTf);
}

TEST(SimulateTreated, AlternatingTrajectoryIsContinuous) {
  const auto& preset = find_preset("I-a");
  const auto run = simulate_treated(preset.params(), preset.init(Diet::HFD),
                                    TreatmentPlan::parse("alternating-long"), kTf);
  const auto& traj = run.trajectory;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    ASSERT_GT(traj.times[i], traj.times[i - 1]);
    const double dt = traj.times[i] - traj.times[i - 1];
    for (int k = 0; k < 4; ++k) {
      // Per-node change bounded by the slope envelope; a restart glitch would
      // show up as a jump far beyond it.
      const double bound =
          dt * std::max(std::abs(traj.slopes[i][k]), std::abs(traj.slopes[i - 1][k])) * 2.0 + 1e-6;
      EXPECT_LE(std::abs(traj.states[i][k] - traj.states[i - 1][k]), bound) << "t=" << traj.times[i];
    }
  }
}

TEST(SimulateTreated, NoDeathReducesToBasicModel) {
  ModelParams p;
  p.c = 0.0;
  p.k2 = 0.0;
  const DietInit init = DietInit::table(Diet::HFD);
  const StateExtended y0{init.S0, 0.0, init.E0, init.F0};
  std::vector<double> times;
  for (int i = 0; i <= 150; ++i) times.push_back(0.1 * i);
  ode::IntegratorConfig tight{.rtol = 1e-12, .atol = 1e-12, .initial_step = std::nullopt};
  const auto ext = simulate_constant(p, y0, 0.0, times, tight);
  const auto basic = ode::integrate<3>(
      [&](double, const ode::Vec<3>& y) { return rhs_basic(StateBasic::from_array(y), p).to_array(); },
      ode::Vec<3>{init.T0, init.E0, init.F0}, 0.0, 15.0, tight, times);
  ASSERT_EQ(ext.size(), basic.size());
  for (std::size_t i = 0; i < ext.size(); ++i) {
    EXPECT_NEAR(ext.states[i][0], basic.states[i][0], 1e-8 * basic.states[i][0]);
    EXPECT_NEAR(ext.states[i][2], basic.states[i][1], 1e-8 * basic.states[i][1]);
    EXPECT_NEAR(ext.states[i][3], basic.states[i][2], 1e-8 * basic.states[i][2]);
    EXPECT_EQ(ext.states[i][1], 0.0);
  }
}

TEST(Summarize, EradicationUsesInoculumSize) {
  TreatedRun run;
  run.t_tr = 5.0;
  run.state_at_start = {400.0, 100.0, 1.0, 1.0};
  run.trajectory.times = {0.0, 25.0};
  run.trajectory.states = {{1.0, 0.0, 1.0, 1.0}, {0.6, 0.3, 1.0, 1.0}};
  run.trajectory.slopes.resize(2);
  run.trajectory.controls = {0.0, 0.0};
  auto s = summarize(run);
  EXPECT_TRUE(s.eradicated);
  EXPECT_DOUBLE_EQ(s.R_at_start, 100.0);
  EXPECT_DOUBLE_EQ(s.burden_at_start, 500.0);
  run.trajectory.states.back() = {0.6, 0.4, 1.0, 1.0};
  s = summarize(run);
  EXPECT_FALSE(s.eradicated);
}
