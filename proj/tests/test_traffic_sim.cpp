#include "rdeep/traffic_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace rdeep;

namespace {

SimConfig quiet() {
  SimConfig c;
  c.ovm.noise_amp = 0.0;
  return c;
}

ScenarioScript cruise(double seconds) {
  return ScenarioScript(15.0, {{seconds, ScenarioScript::Mode::hold_velocity, 15.0}}, 0.05);
}

}  // namespace

TEST(Ovm, DesiredVelocity) {
  const OvmParams p;
  EXPECT_DOUBLE_EQ(ovm_desired_velocity(5.0, p), 0.0);
  EXPECT_DOUBLE_EQ(ovm_desired_velocity(35.0, p), 30.0);
  EXPECT_NEAR(ovm_desired_velocity(20.0, p), 15.0, 1e-12);
  EXPECT_DOUBLE_EQ(ovm_desired_velocity(2.0, p), 0.0);
  EXPECT_DOUBLE_EQ(ovm_desired_velocity(50.0, p), 30.0);
}

TEST(Ovm, EquilibriumSpacing) {
  const OvmParams p;
  EXPECT_NEAR(equilibrium_spacing(15.0, p), 20.0, 1e-12);
  EXPECT_NEAR(equilibrium_spacing(1e-9, p), 5.0, 1e-3);
  for (double v : {0.5, 3.0, 9.7, 15.0, 22.2, 29.5}) EXPECT_NEAR(ovm_desired_velocity(equilibrium_spacing(v, p), p), v, 1e-12);
  EXPECT_THROW(equilibrium_spacing(0.0, p), ValueError);
  EXPECT_THROW(equilibrium_spacing(30.0, p), ValueError);
}

TEST(Ovm, HandEvaluatedAcceleration) {
  EXPECT_NEAR(ovm_acceleration(20.0, 15.0, 16.0, OvmParams{}), 0.9, 1e-12);
}

TEST(Ovm, ParameterValidation) {
  OvmParams p;
  p.s_go = 4.0;
  EXPECT_THROW(p.validate(), ValueError);
}

TEST(Fuel, HandEvaluated) {
  EXPECT_NEAR(fuel_rate(15.0, 0.0), 1.2216, 1e-12);
  EXPECT_NEAR(fuel_rate(0.0, 0.0), 0.444, 1e-15);
  EXPECT_NEAR(fuel_rate(10.0, -5.0), 0.444, 1e-15);
  const double R = 0.333 + 0.00108 * 100 + 1.2;
  EXPECT_NEAR(fuel_rate(10.0, 1.0), 0.444 + 0.09 * R * 10 + 0.054 * 10, 1e-12);
}

TEST(Fuel, NeverBelowIdle) {
  for (double v = 0; v <= 30; v += 0.7)
    for (double a = -5; a <= 2; a += 0.3) EXPECT_GE(fuel_rate(v, a), 0.444);
}

TEST(Simulator, EquilibriumIsFixedPoint) {
  TrafficSimulator sim(quiet(), cruise(60.0), 1);
  const auto s0 = sim.states();
  double dev = 0.0;
  for (int k = 0; k < 1000; ++k) {
    sim.step(0.0);
    for (std::size_t i = 0; i < sim.size(); ++i) {
      dev = std::max(dev, std::abs(sim.states()[i].velocity - 15.0));
      if (i > 0) dev = std::max(dev, std::abs(sim.spacing(i) - 20.0));
    }
  }
  EXPECT_LT(dev, 1e-9);
  for (std::size_t i = 1; i < sim.size(); ++i) EXPECT_GT(sim.spacing(i), 5.0);
  (void)s0;
}

TEST(Simulator, LayoutMatchesPlatoon) {
  TrafficSimulator sim(SimConfig{}, cruise(1.0), 1);
  ASSERT_EQ(sim.size(), 9u);
  EXPECT_EQ(sim.states()[0].role, Role::scripted);
  EXPECT_EQ(sim.head_index(), 3u);
  EXPECT_EQ(sim.cav_index(), 4u);
  EXPECT_EQ(sim.states()[4].role, Role::cav);
  EXPECT_EQ(sim.states()[8].role, Role::hdv);
}

TEST(Simulator, CavInputClipped) {
  TrafficSimulator sim(quiet(), cruise(1.0), 1);
  const StepResult r = sim.step(-6.0);
  EXPECT_DOUBLE_EQ(r.accel[sim.cav_index()], -5.0);
  EXPECT_DOUBLE_EQ(sim.states()[sim.cav_index()].velocity, 15.0 - 5.0 * 0.05);
  TrafficSimulator sim2(quiet(), cruise(1.0), 1);
  EXPECT_DOUBLE_EQ(sim2.step(3.0).accel[sim2.cav_index()], 2.0);
}

TEST(Simulator, ExplicitEulerUsesOldVelocity) {
  TrafficSimulator sim(quiet(), cruise(1.0), 1);
  const double p0 = sim.states()[4].position;
  sim.step(1.0);
  EXPECT_DOUBLE_EQ(sim.states()[4].position, p0 + 15.0 * 0.05);
  EXPECT_DOUBLE_EQ(sim.states()[4].velocity, 15.0 + 0.05);
}

TEST(Simulator, NoiseIsSeeded) {
  TrafficSimulator a(SimConfig{}, cruise(5.0), 7), b(SimConfig{}, cruise(5.0), 7), c(SimConfig{}, cruise(5.0), 8);
  for (int k = 0; k < 50; ++k) {
    a.step(0.0);
    b.step(0.0);
    c.step(0.0);
  }
  EXPECT_EQ(a.states()[8].position, b.states()[8].position);
  EXPECT_NE(a.states()[8].position, c.states()[8].position);
}

TEST(Simulator, CollisionRecorded) {
  SimConfig cfg = quiet();
  TrafficSimulator sim(cfg, cruise(30.0), 1);
  bool hit = false;
  for (int k = 0; k < 600 && !hit; ++k) hit = sim.step(2.0).collision;
  EXPECT_TRUE(hit);
  EXPECT_TRUE(sim.collided());
  EXPECT_THROW(sim.step(0.0), SimulationError);
}

TEST(Scenario, LeaderHitsSegmentBoundaries) {
  const ScenarioScript s = ScenarioScript::nedc(0.05);
  EXPECT_EQ(s.total_steps(), 1700);
  SimConfig cfg = quiet();
  TrafficSimulator sim(cfg, s, 3);
  const auto& starts = s.segment_starts();
  std::size_t next = 0;
  for (long k = 0; k <= s.total_steps(); ++k) {
    while (next < starts.size() && starts[next] == k) {
      EXPECT_NEAR(sim.states()[0].velocity, s.velocity_at_step(k), 1e-9) << "boundary " << next;
      ++next;
    }
    if (k < s.total_steps()) sim.step(0.0, true);
  }
  EXPECT_NEAR(s.velocity_at_step(s.total_steps()), 15.0, 1e-12);
  ASSERT_EQ(s.marks().size(), 5u);
  EXPECT_EQ(s.marks().front(), 200);
}

TEST(Scenario, RejectsBadSegments) {
  EXPECT_THROW(ScenarioScript(15.0, {{1.0, ScenarioScript::Mode::hold_velocity, 14.0}}, 0.05), ValueError);
  EXPECT_THROW(ScenarioScript(1.0, {{1.0, ScenarioScript::Mode::constant_accel, -5.0}}, 0.05), ValueError);
  EXPECT_THROW(ScenarioScript(1.0, {{0.0, ScenarioScript::Mode::hold_velocity, 1.0}}, 0.05), ValueError);
}

TEST(Scenario, BrakeProfile) {
  const ScenarioScript s = ScenarioScript::brake(0.05, 4.0, 8.0);
  EXPECT_NEAR(s.velocity_at_step(80 + 40), 5.0, 1e-9);
  EXPECT_NEAR(s.velocity_at_step(s.total_steps()), 15.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.acceleration_at_step(80), -5.0);
}

TEST(Measurement, OutputsAndDisturbance) {
  TrafficSimulator sim(quiet(), cruise(1.0), 1);
  MeasuredOutput m = measure_output(sim, 15.0, 20.0);
  EXPECT_EQ(m.y.size(), 6);
  EXPECT_LT(m.y.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_DOUBLE_EQ(m.eps, 0.0);
  sim.pin_head_velocity(14.0);
  m = measure_output(sim, 15.0, 20.0);
  EXPECT_DOUBLE_EQ(m.eps, -1.0);
  m = measure_output(sim, 15.0, 18.0);
  EXPECT_NEAR(m.y(5), 2.0, 1e-12);
}

TEST(TrajectoryCsv, Header) {
  std::ostringstream out;
  write_trajectory_csv(out, {{0.0, -3, Role::scripted, 60.0, 15.0, 0.0, std::numeric_limits<double>::infinity(), 1.2216}});
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "t,veh_id,role,position,velocity,accel,spacing,fuel_rate");
  EXPECT_NE(out.str().find(",scripted,"), std::string::npos);
}
