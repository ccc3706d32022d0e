#include "rdeep/harness.hpp"
#include "rdeep/report.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace rdeep;

namespace {

ControllerConfig small_config() {
  ControllerConfig c;
  c.T_ini = 8;
  c.N = 15;
  c.Ts = 5;
  return c;
}

const OfflineDataset& dataset() {
  static const OfflineDataset d = collect_offline_data(CollectionConfig{}, 300, 5);
  return d;
}

HankelBlocks blocks(const ControllerConfig& c) {
  return partition(dataset().u, dataset().e, dataset().y, c.T_ini, c.N);
}

InitialWindow window_from_data(Index k0, Index T_ini) {
  const OfflineDataset& d = dataset();
  const Index p = d.y.dim();
  InitialWindow w{Vector(T_ini), Vector(T_ini), Vector(p * T_ini)};
  for (Index i = 0; i < T_ini; ++i) {
    w.u_ini(i) = d.u.values(0, k0 + i);
    w.e_ini(i) = d.e.values(0, k0 + i);
    w.y_ini.segment(i * p, p) = d.y.values.col(k0 + i);
  }
  return w;
}

InitialWindow zero_window(Index T_ini, Index p) {
  return {Vector::Zero(T_ini), Vector::Zero(T_ini), Vector::Zero(p * T_ini)};
}

ScenarioScript short_hold(double seconds) { return ScenarioScript::Builder(15.0, 0.05).hold(seconds).build(); }

}  // namespace

TEST(Equilibrium, ConstantHistory) {
  const std::vector<double> hv(60, 15.0);
  const Equilibrium eq = estimate_equilibrium(hv, 40);
  EXPECT_NEAR(eq.v_star, 15.0, 1e-12);
  EXPECT_NEAR(eq.s_star, 20.0, 1e-9);
  EXPECT_NEAR(eq.s_tilde_min, -15.0, 1e-9);
  EXPECT_NEAR(eq.s_tilde_max, 20.0, 1e-9);
}

TEST(Equilibrium, UsesOnlyTheWindow) {
  std::vector<double> hv(20, 1.0);
  hv.insert(hv.end(), 40, 5.0);
  const Equilibrium eq = estimate_equilibrium(hv, 40);
  EXPECT_NEAR(eq.v_star, 5.0, 1e-12);
  EXPECT_NEAR(eq.s_star, equilibrium_spacing(5.0, OvmParams{}), 1e-12);
}

TEST(Equilibrium, ClampsIntoRange) {
  EXPECT_NEAR(estimate_equilibrium(std::vector<double>(5, 40.0), 5).v_star, OvmParams{}.v_max - 0.1, 1e-12);
  EXPECT_NEAR(estimate_equilibrium(std::vector<double>(5, 0.0), 5).v_star, 0.1, 1e-12);
}

TEST(Equilibrium, RejectsBadWindow) {
  EXPECT_THROW(estimate_equilibrium(std::vector<double>(10, 15.0), 11), ValueError);
  EXPECT_THROW(estimate_equilibrium(std::vector<double>(10, 15.0), 0), ValueError);
  EXPECT_THROW(estimate_equilibrium({}, 1), ValueError);
}

TEST(Safety, InsideBand) {
  const SafetyReport r = classify_safety({5.0, 20.0, 40.0}, 5.0, 40.0);
  EXPECT_FALSE(r.violation);
  EXPECT_FALSE(r.emergency);
  EXPECT_FALSE(r.collision);
}

TEST(Safety, ViolationOnly) {
  const SafetyReport r = classify_safety({20.0, 41.5, 30.0}, 5.0, 40.0);
  EXPECT_TRUE(r.violation);
  EXPECT_FALSE(r.emergency);
  EXPECT_DOUBLE_EQ(r.max_spacing, 41.5);
}

TEST(Safety, CollisionImpliesEverything) {
  const SafetyReport r = classify_safety({20.0, -0.2}, 5.0, 40.0);
  EXPECT_TRUE(r.collision);
  EXPECT_TRUE(r.emergency);
  EXPECT_TRUE(r.violation);
}

TEST(Safety, Thresholds) {
  EXPECT_FALSE(classify_safety({4.0}, 5.0, 40.0).violation);
  EXPECT_TRUE(classify_safety({3.9}, 5.0, 40.0).violation);
  EXPECT_FALSE(classify_safety({0.5}, 5.0, 40.0).emergency);
  EXPECT_TRUE(classify_safety({-0.01}, 5.0, 40.0).emergency);
  EXPECT_FALSE(classify_safety({45.0}, 5.0, 40.0).emergency);
  EXPECT_TRUE(classify_safety({45.1}, 5.0, 40.0).emergency);
}

TEST(Config, ValidateRejects) {
  ControllerConfig c;
  EXPECT_NO_THROW(c.validate(5));
  c.Ts = 0;
  EXPECT_THROW(c.validate(5), ValueError);
  c = {};
  c.s_min = 50.0;
  EXPECT_THROW(c.validate(5), ValueError);
  c = {};
  EXPECT_THROW(c.validate(4), DimensionError);  // weights sized for n = 5
}

TEST(Controller, ZeroEstimatorVertexMatchesDirectSolve) {
  ControllerConfig c = small_config();
  c.estimator = EstimatorKind::zero;
  c.method = RobustMethod::vertex;
  c.Ts = 1;
  const HankelBlocks hb = blocks(c);
  Controller ctrl(hb, ControllerKind::robust, c);
  const InitialWindow ini = window_from_data(100, c.T_ini);
  const ConstraintBounds b{};
  const ControlOutcome co = ctrl.control_step(ini, b, 0.0);
  ASSERT_FALSE(co.fallback) << co.diagnostics;

  const Reducer red(std::make_shared<const PredictorCore>(assemble_core(hb)), c.weights);
  const ReducedProblem rp = red.reduce(ini, b);
  const Solution s = solve(vertex_program(rp, zero_polytope(c.N)), c.solver);
  ASSERT_TRUE(s.optimal());
  EXPECT_LT((co.u_sequence - s.x.head(c.N)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(co.u, std::clamp(s.x(0), b.u_min, b.u_max), 1e-9);
}

TEST(Controller, EquilibriumWindowGivesSmallInput) {
  const ControllerConfig c = small_config();
  const HankelBlocks hb = blocks(c);
  const InitialWindow ini = zero_window(c.T_ini, hb.dims.n + 1);
  for (ControllerKind k : {ControllerKind::baseline, ControllerKind::robust}) {
    Controller ctrl(hb, k, c);
    const ControlOutcome co = ctrl.control_step(ini, ConstraintBounds{}, 0.0);
    ASSERT_FALSE(co.fallback) << to_string(k) << ": " << co.diagnostics;
    EXPECT_LT(std::abs(co.u), 0.05) << to_string(k);
  }
}

TEST(Controller, FallbackBlendsTowardHumanLaw) {
  ControllerConfig c = small_config();
  c.solver.max_iterations = 1;
  const HankelBlocks hb = blocks(c);
  Controller ctrl(hb, ControllerKind::robust, c);
  const InitialWindow ini = window_from_data(50, c.T_ini);
  const ConstraintBounds b{};
  const double a = -1.0;
  const ControlOutcome first = ctrl.control_step(ini, b, a);
  ASSERT_TRUE(first.fallback);
  EXPECT_NE(first.status, SolveStatus::optimal);
  EXPECT_NEAR(first.u, 0.2 * a, 1e-12);
  const ControlOutcome second = ctrl.control_step(ini, b, a);
  ASSERT_TRUE(second.fallback);
  EXPECT_NEAR(second.u, 0.6 * first.u + 0.4 * a, 1e-12);
  for (int i = 0; i < 5; ++i) ctrl.control_step(ini, b, a);
  EXPECT_NEAR(ctrl.control_step(ini, b, a).u, a, 1e-12);
}

TEST(Controller, DisturbanceSetFollowsEstimator) {
  ControllerConfig c = small_config();
  const HankelBlocks hb = blocks(c);
  Vector e(c.T_ini);
  for (Index i = 0; i < e.size(); ++i) e(i) = 0.1 * static_cast<double>(i) - 0.3;
  c.estimator = EstimatorKind::constant;
  c.Ts = 1;
  const DisturbancePolytope w = Controller(hb, ControllerKind::robust, c).disturbance_set(e);
  EXPECT_EQ(w.dim(), c.N);
  const DisturbancePolytope ref = estimate_constant_bounds(e, c.N);
  EXPECT_EQ(w.eps_min, ref.eps_min);
  EXPECT_EQ(w.eps_max, ref.eps_max);
  c.Ts = 5;
  const DisturbancePolytope wd = Controller(hb, ControllerKind::robust, c).disturbance_set(e);
  EXPECT_EQ(wd.dim(), static_cast<Index>(downsample_anchors(c.N, 5).size()));
}

TEST(Controller, RejectsMismatchedDepth) {
  const ControllerConfig c = small_config();
  ControllerConfig other = c;
  other.N = 12;
  EXPECT_THROW(Controller(blocks(c), ControllerKind::robust, other), DimensionError);
  EXPECT_THROW(Controller(blocks(c), ControllerKind::allhdv, c), ValueError);
}

TEST(Run, AllHdvNeedsNoData) {
  RunConfig rc;
  rc.controller = ControllerKind::allhdv;
  rc.script = short_hold(1.0);
  const RunResult r = run_receding_horizon(rc, nullptr);
  EXPECT_EQ(r.steps_run, 20);
  EXPECT_EQ(r.trajectory.size(), 20u * 9u);
  EXPECT_EQ(r.cav_spacing.size(), 20u);
  for (const StepLog& s : r.steps) EXPECT_FALSE(s.controlled);
}

TEST(Run, ControllerNeedsData) {
  RunConfig rc;
  rc.controller = ControllerKind::robust;
  rc.ctrl = small_config();
  rc.script = short_hold(1.0);
  EXPECT_THROW(run_receding_horizon(rc, nullptr), ValueError);
}

TEST(Run, WarmUpThenClosedLoop) {
  RunConfig rc;
  rc.controller = ControllerKind::robust;
  rc.ctrl = small_config();
  rc.script = short_hold(1.5);
  rc.seed = 3;
  const RunResult r = run_receding_horizon(rc, &dataset());
  ASSERT_EQ(r.steps_run, 30);
  for (long k = 0; k < 30; ++k) EXPECT_EQ(r.steps[static_cast<std::size_t>(k)].controlled, k >= rc.ctrl.T_ini) << k;
  EXPECT_EQ(r.fallbacks, 0);
  // Receding horizon: the logged input is the one the CAV applied.
  const std::size_t cav_row = static_cast<std::size_t>(rc.sim.n_ahead + 1);
  for (std::size_t k = 0; k < r.steps.size(); ++k)
    EXPECT_DOUBLE_EQ(r.steps[k].u, r.trajectory[k * 9 + cav_row].accel);
}

TEST(Run, Deterministic) {
  RunConfig rc;
  rc.controller = ControllerKind::baseline;
  rc.ctrl = small_config();
  rc.script = short_hold(1.5);
  rc.seed = 11;
  std::ostringstream a, b;
  write_trajectory_csv(a, run_receding_horizon(rc, &dataset()).trajectory);
  write_trajectory_csv(b, run_receding_horizon(rc, &dataset()).trajectory);
  EXPECT_EQ(a.str(), b.str());
  rc.seed = 12;
  std::ostringstream c;
  write_trajectory_csv(c, run_receding_horizon(rc, &dataset()).trajectory);
  EXPECT_NE(a.str(), c.str());
}

TEST(ExperimentB, RatesAndThreadIndependence) {
  ExperimentBConfig cfg;
  cfg.ctrl = small_config();
  cfg.T = 300;
  cfg.trials = 3;
  cfg.cruise = 1.0;
  cfg.final_hold = 1.0;
  cfg.threads = 1;
  const ExperimentBResult one = experiment_b(cfg);
  cfg.threads = 3;
  const ExperimentBResult three = experiment_b(cfg);
  std::ostringstream a, b;
  write_experiment_b_csv(a, one);
  write_experiment_b_csv(b, three);
  EXPECT_EQ(a.str(), b.str());
  ASSERT_EQ(one.controllers.size(), 2u);
  for (std::size_t c = 0; c < 2; ++c) {
    int e = 0;
    for (const TrialOutcome& t : one.trials) e += t.dataset_ok && t.safety[c].emergency;
    EXPECT_DOUBLE_EQ(one.emergency_rate[c], e / 3.0);
  }
  EXPECT_EQ(one.trials[2].seed, cfg.base_seed + 2);
}

TEST(Report, ConfigRoundTrip) {
  ControllerConfig c;
  c.T_ini = 12;
  c.Ts = 5;
  c.estimator = EstimatorKind::constant;
  c.method = RobustMethod::vertex;
  c.s_max = 35.5;
  c.weights.r = 0.25;
  c.weights.q_step(c.weights.q_step.size() - 1) = 0.75;
  std::ostringstream out;
  write_config(out, c);
  ControllerConfig d;
  std::istringstream in(out.str());
  apply_config(in, d);
  std::ostringstream again;
  write_config(again, d);
  EXPECT_EQ(out.str(), again.str());
  EXPECT_EQ(d.T_ini, 12);
  EXPECT_EQ(d.estimator, EstimatorKind::constant);
  EXPECT_DOUBLE_EQ(d.weights.q_step(d.weights.q_step.size() - 1), 0.75);
}

TEST(Report, ConfigCommentsAndErrors) {
  ControllerConfig c;
  std::istringstream ok("# comment\n\n  Ts = 6   # trailing\nmethod=vertex\n");
  apply_config(ok, c);
  EXPECT_EQ(c.Ts, 6);
  EXPECT_EQ(c.method, RobustMethod::vertex);
  std::istringstream unknown("horizon = 3\n");
  EXPECT_THROW(apply_config(unknown, c), FormatError);
  std::istringstream badnum("s_min = five\n");
  EXPECT_THROW(apply_config(badnum, c), FormatError);
  std::istringstream badint("N = 2.5\n");
  EXPECT_THROW(apply_config(badint, c), FormatError);
  std::istringstream noeq("Ts 6\n");
  EXPECT_THROW(apply_config(noeq, c), FormatError);
  std::istringstream badenum("estimator = median\n");
  EXPECT_THROW(apply_config(badenum, c), FormatError);
}

TEST(Report, SummaryAndSvg) {
  RunConfig rc;
  rc.controller = ControllerKind::allhdv;
  rc.script = short_hold(1.0);
  const RunResult r = run_receding_horizon(rc, nullptr);
  std::ostringstream csv;
  write_summary_csv(csv, run_summary(rc, r));
  EXPECT_EQ(csv.str().rfind("metric,value\ncontroller,allhdv\n", 0), 0u);
  EXPECT_NE(csv.str().find("\nsteps,20\n"), std::string::npos);

  const auto series = trajectory_series(r.trajectory, false);
  EXPECT_EQ(series.size(), 9u);
  EXPECT_EQ(trajectory_series(r.trajectory, true).size(), 8u);  // the leader has no predecessor
  std::ostringstream svg;
  write_svg_chart(svg, "v <test>", "t [s]", "v [m/s]", series);
  const std::string s = svg.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("v &lt;test&gt;"), std::string::npos);
  std::size_t count = 0;
  for (std::size_t pos = s.find("<polyline"); pos != std::string::npos; pos = s.find("<polyline", pos + 1)) ++count;
  EXPECT_EQ(count, series.size());
}
