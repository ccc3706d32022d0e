#pragma once

#include "rdeep/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rdeep {

/// Optimal-velocity-model parameters for human drivers.
struct OvmParams {
  double alpha = 0.6;      // 1/s, headway gain
  double beta = 0.9;       // 1/s, relative-velocity gain
  double s_st = 5.0;       // m, stop spacing
  double s_go = 35.0;      // m, free-flow spacing
  double v_max = 30.0;     // m/s
  double noise_amp = 0.1;  // m/s^2, half-width of the uniform acceleration noise

  void validate() const;
};

struct AccelLimits {
  double a_min = -5.0;
  double a_max = 2.0;
};

enum class Role { scripted, hdv, cav };

std::string to_string(Role role);

struct VehicleState {
  double position = 0.0;  // m
  double velocity = 0.0;  // m/s, never negative
  Role role = Role::hdv;
};

/// Desired velocity of the OVM: 0 below s_st, v_max above s_go, cosine ramp between.
double ovm_desired_velocity(double spacing, const OvmParams& p);

/// Inverse of ovm_desired_velocity on (0, v_max).
double equilibrium_spacing(double v_star, const OvmParams& p);

/// Noise-free, unclipped OVM acceleration.
double ovm_acceleration(double spacing, double velocity, double pred_velocity, const OvmParams& p);

/// Instantaneous fuel consumption in mL/s.
double fuel_rate(double velocity, double accel);

/// Piecewise leader profile. Durations must be whole multiples of the step.
class ScenarioScript {
public:
  enum class Mode { hold_velocity, constant_accel };

  struct Segment {
    double duration;  // s
    Mode mode;
    double value;  // m/s for hold_velocity, m/s^2 for constant_accel
  };

  ScenarioScript(double initial_velocity, std::vector<Segment> segments, double dt);

  /// Fluent construction helpers.
  class Builder {
  public:
    Builder(double initial_velocity, double dt) : v0_(initial_velocity), v_(initial_velocity), dt_(dt) {}
    Builder& hold(double duration);
    Builder& accelerate_to(double target_velocity, double rate);
    /// Marks the current step count as a phase boundary.
    Builder& mark();
    ScenarioScript build() const;

  private:
    double v0_;
    double v_;
    double dt_;
    std::vector<Segment> segments_;
    std::vector<long> marks_;
  };

  double acceleration_at_step(long k) const;
  double velocity_at_step(long k) const;
  double initial_velocity() const { return v0_; }
  long total_steps() const { return total_steps_; }
  double dt() const { return dt_; }
  const std::vector<Segment>& segments() const { return segments_; }
  /// Step index at which each segment starts, plus total_steps() at the end.
  const std::vector<long>& segment_starts() const { return starts_; }
  /// Phase marks recorded by the builder (step indices).
  const std::vector<long>& marks() const { return marks_; }

  /// NEDC-motivated profile with four phases; marks are the phase boundaries.
  static ScenarioScript nedc(double dt);
  /// Braking profile: cruise, hard brake to 5 m/s, hold, accelerate back, hold.
  static ScenarioScript brake(double dt, double cruise = 4.0, double final_hold = 8.0);

private:
  double v0_;
  double dt_;
  std::vector<Segment> segments_;
  std::vector<long> starts_;
  std::vector<long> step_counts_;
  std::vector<long> marks_;
  long total_steps_ = 0;

  friend class Builder;
};

struct SimConfig {
  OvmParams ovm;
  AccelLimits limits;
  double dt = 0.05;
  int n_ahead = 3;      // scripted leader plus HDVs in front of the head vehicle
  int n_followers = 4;  // HDVs behind the CAV
  bool clip_hdv = true;
  bool halt_on_collision = true;
};

struct StepResult {
  std::vector<double> accel;  // applied accelerations, one per vehicle
  bool collision = false;
};

/// Mixed-traffic platoon: scripted leader, HDVs, head HDV, CAV, trailing HDVs.
class TrafficSimulator {
public:
  TrafficSimulator(SimConfig config, ScenarioScript leader, std::uint64_t seed);

  const std::vector<VehicleState>& states() const { return states_; }
  const SimConfig& config() const { return config_; }
  std::size_t size() const { return states_.size(); }
  std::size_t head_index() const { return static_cast<std::size_t>(config_.n_ahead); }
  std::size_t cav_index() const { return head_index() + 1; }
  long step_index() const { return k_; }
  double time() const { return static_cast<double>(k_) * config_.dt; }
  bool collided() const { return collided_; }
  bool halted() const { return collided_ && config_.halt_on_collision; }

  /// Spacing to the predecessor; +inf for the leader.
  double spacing(std::size_t i) const;

  /// Pins the head vehicle's velocity (offline collection); nullopt releases it.
  void pin_head_velocity(std::optional<double> v);

  /// OVM-law acceleration the CAV would apply as a human driver (no noise, unclipped).
  double cav_ovm_acceleration() const;

  /// Advances one step. cav_as_hdv drives the CAV with the OVM law plus noise.
  StepResult step(double cav_input, bool cav_as_hdv = false);

private:
  SimConfig config_;
  ScenarioScript leader_;
  std::vector<VehicleState> states_;
  std::mt19937_64 rng_;
  std::optional<double> pinned_head_;
  long k_ = 0;
  bool collided_ = false;
};

struct MeasuredOutput {
  Vector y;     // velocity errors of the CAV and followers, then CAV spacing error
  double eps;   // head-vehicle velocity error
};

MeasuredOutput measure_output(const TrafficSimulator& sim, double v_star, double s_star_cav);

struct TrajectoryRow {
  double t;
  int veh_id;  // position relative to the head vehicle (leader is -n_ahead)
  Role role;
  double position;
  double velocity;
  double accel;
  double spacing;
  double fuel_rate;
};

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace rdeep
