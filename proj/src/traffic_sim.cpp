#include "rdeep/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>

namespace rdeep {

void OvmParams::validate() const {
  require_value(s_st > 0.0 && s_st < s_go, "OvmParams: need 0 < s_st < s_go");
  require_value(v_max > 0.0, "OvmParams: v_max must be positive");
  require_value(alpha > 0.0 && beta > 0.0, "OvmParams: alpha and beta must be positive");
  require_value(noise_amp >= 0.0, "OvmParams: noise_amp must be nonnegative");
}

std::string to_string(Role role) {
  switch (role) {
    case Role::scripted: return "scripted";
    case Role::hdv: return "hdv";
    case Role::cav: return "cav";
  }
  return "unknown";
}

double ovm_desired_velocity(double spacing, const OvmParams& p) {
  if (spacing <= p.s_st) return 0.0;
  if (spacing >= p.s_go) return p.v_max;
  return 0.5 * p.v_max * (1.0 - std::cos(std::numbers::pi * (spacing - p.s_st) / (p.s_go - p.s_st)));
}

double equilibrium_spacing(double v_star, const OvmParams& p) {
  require_value(v_star > 0.0 && v_star < p.v_max, "equilibrium_spacing: v_star outside (0, v_max)");
  return p.s_st + (p.s_go - p.s_st) / std::numbers::pi * std::acos(1.0 - 2.0 * v_star / p.v_max);
}

double ovm_acceleration(double spacing, double velocity, double pred_velocity, const OvmParams& p) {
  return p.alpha * (ovm_desired_velocity(spacing, p) - velocity) + p.beta * (pred_velocity - velocity);
}

double fuel_rate(double velocity, double accel) {
  const double R = 0.333 + 0.00108 * velocity * velocity + 1.200 * accel;
  if (R <= 0.0) return 0.444;
  double f = 0.444 + 0.090 * R * velocity;
  if (accel > 0.0) f += 0.054 * accel * accel * velocity;
  return f;
}

// ---------------------------------------------------------------------------

static long steps_for(double duration, double dt) {
  const double raw = duration / dt;
  const long n = std::lround(raw);
  require_value(n > 0 && std::abs(raw - static_cast<double>(n)) < 1e-6,
                "ScenarioScript: segment duration must be a positive multiple of dt");
  return n;
}

ScenarioScript::ScenarioScript(double initial_velocity, std::vector<Segment> segments, double dt)
    : v0_(initial_velocity), dt_(dt), segments_(std::move(segments)) {
  require_value(dt > 0.0, "ScenarioScript: dt must be positive");
  require_value(initial_velocity >= 0.0, "ScenarioScript: negative initial velocity");
  double v = v0_;
  long k = 0;
  for (const Segment& s : segments_) {
    require_value(s.duration > 0.0, "ScenarioScript: durations must be positive");
    const long n = steps_for(s.duration, dt_);
    if (s.mode == Mode::hold_velocity) {
      require_value(std::abs(s.value - v) < 1e-9, "ScenarioScript: hold velocity does not match current velocity");
    } else {
      v += s.value * static_cast<double>(n) * dt_;
      require_value(v >= -1e-9, "ScenarioScript: profile reaches negative velocity");
    }
    starts_.push_back(k);
    step_counts_.push_back(n);
    k += n;
  }
  starts_.push_back(k);
  total_steps_ = k;
}

double ScenarioScript::acceleration_at_step(long k) const {
  if (k < 0 || k >= total_steps_) return 0.0;
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), k);
  const auto seg = static_cast<std::size_t>(it - starts_.begin()) - 1;
  const Segment& s = segments_[seg];
  return s.mode == Mode::constant_accel ? s.value : 0.0;
}

double ScenarioScript::velocity_at_step(long k) const {
  double v = v0_;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (k <= starts_[i]) break;
    const long n = std::min(k, starts_[i + 1]) - starts_[i];
    if (segments_[i].mode == Mode::constant_accel) v += segments_[i].value * static_cast<double>(n) * dt_;
  }
  return v;
}

ScenarioScript::Builder& ScenarioScript::Builder::hold(double duration) {
  segments_.push_back({duration, Mode::hold_velocity, v_});
  return *this;
}

ScenarioScript::Builder& ScenarioScript::Builder::accelerate_to(double target_velocity, double rate) {
  require_value(rate != 0.0, "accelerate_to: zero rate");
  const double duration = (target_velocity - v_) / rate;
  require_value(duration > 0.0, "accelerate_to: rate sign does not reach target");
  segments_.push_back({duration, Mode::constant_accel, rate});
  v_ = target_velocity;
  return *this;
}

ScenarioScript::Builder& ScenarioScript::Builder::mark() {
  long k = 0;
  for (const Segment& s : segments_) k += steps_for(s.duration, dt_);
  marks_.push_back(k);
  return *this;
}

ScenarioScript ScenarioScript::Builder::build() const {
  ScenarioScript s(v0_, segments_, dt_);
  s.marks_ = marks_;
  return s;
}

ScenarioScript ScenarioScript::nedc(double dt) {
  return Builder(15.0, dt)
      .hold(10.0)
      .mark()
      .accelerate_to(8.0, -1.0)
      .hold(10.0)
      .mark()
      .accelerate_to(12.0, 0.5)
      .hold(10.0)
      .mark()
      .accelerate_to(18.0, 0.5)
      .hold(15.0)
      .mark()
      .accelerate_to(15.0, -1.0)
      .hold(10.0)
      .mark()
      .build();
}

ScenarioScript ScenarioScript::brake(double dt, double cruise, double final_hold) {
  return Builder(15.0, dt)
      .hold(cruise)
      .mark()
      .accelerate_to(5.0, -5.0)
      .hold(3.0)
      .accelerate_to(15.0, 2.0)
      .hold(final_hold)
      .mark()
      .build();
}

// ---------------------------------------------------------------------------

TrafficSimulator::TrafficSimulator(SimConfig config, ScenarioScript leader, std::uint64_t seed)
    : config_(config), leader_(std::move(leader)), rng_(seed) {
  config_.ovm.validate();
  require_value(config_.dt > 0.0, "SimConfig: dt must be positive");
  require_value(config_.n_ahead >= 1 && config_.n_followers >= 0, "SimConfig: bad platoon layout");
  require_value(std::abs(leader_.dt() - config_.dt) < 1e-12, "TrafficSimulator: script dt differs from sim dt");
  const double v0 = leader_.initial_velocity();
  const double s0 = equilibrium_spacing(v0, config_.ovm);
  const std::size_t n = static_cast<std::size_t>(config_.n_ahead + 2 + config_.n_followers);
  states_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    states_[i].position = -static_cast<double>(i) * s0;
    states_[i].velocity = v0;
    states_[i].role = Role::hdv;
  }
  states_[0].role = Role::scripted;
  states_[cav_index()].role = Role::cav;
}

double TrafficSimulator::spacing(std::size_t i) const {
  if (i == 0) return std::numeric_limits<double>::infinity();
  return states_[i - 1].position - states_[i].position;
}

void TrafficSimulator::pin_head_velocity(std::optional<double> v) {
  if (v) {
    require_value(*v >= 0.0, "pin_head_velocity: negative velocity");
    states_[head_index()].velocity = *v;
  }
  pinned_head_ = v;
}

double TrafficSimulator::cav_ovm_acceleration() const {
  const std::size_t c = cav_index();
  return ovm_acceleration(spacing(c), states_[c].velocity, states_[c - 1].velocity, config_.ovm);
}

StepResult TrafficSimulator::step(double cav_input, bool cav_as_hdv) {
  if (halted()) throw SimulationError("TrafficSimulator: step after collision");
  const std::size_t n = states_.size();
  const OvmParams& p = config_.ovm;
  std::uniform_real_distribution<double> noise(-p.noise_amp, p.noise_amp);
  auto clip = [&](double a) { return std::clamp(a, config_.limits.a_min, config_.limits.a_max); };

  StepResult res;
  res.accel.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const VehicleState& s = states_[i];
    double a = 0.0;
    if (i == 0) {
      a = clip(leader_.acceleration_at_step(k_));
    } else if (i == head_index() && pinned_head_) {
      a = 0.0;
    } else if (s.role == Role::cav && !cav_as_hdv) {
      a = clip(cav_input);
    } else {
      a = ovm_acceleration(spacing(i), s.velocity, states_[i - 1].velocity, p);
      if (p.noise_amp > 0.0) a += noise(rng_);
      if (config_.clip_hdv || s.role == Role::cav) a = clip(a);
    }
    res.accel[i] = a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& s = states_[i];
    const double v_old = s.velocity;
    s.velocity = std::max(0.0, v_old + res.accel[i] * config_.dt);
    s.position += v_old * config_.dt;
  }
  ++k_;
  for (std::size_t i = 1; i < n; ++i) {
    if (spacing(i) <= 0.0) {
      res.collision = true;
      collided_ = true;
    }
  }
  return res;
}

MeasuredOutput measure_output(const TrafficSimulator& sim, double v_star, double s_star_cav) {
  const auto& st = sim.states();
  const std::size_t c = sim.cav_index();
  const std::size_t n = st.size() - c;
  MeasuredOutput out;
  out.y.resize(static_cast<Index>(n + 1));
  for (std::size_t i = 0; i < n; ++i) out.y(static_cast<Index>(i)) = st[c + i].velocity - v_star;
  out.y(static_cast<Index>(n)) = sim.spacing(c) - s_star_cav;
  out.eps = st[sim.head_index()].velocity - v_star;
  return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  out << "t,veh_id,role,position,velocity,accel,spacing,fuel_rate\n";
  out << std::setprecision(17);
  for (const TrajectoryRow& r : rows) {
    out << r.t << ',' << r.veh_id << ',' << to_string(r.role) << ',' << r.position << ',' << r.velocity << ','
        << r.accel << ',';
    if (std::isfinite(r.spacing))
      out << r.spacing;
    else
      out << "inf";
    out << ',' << r.fuel_rate << '\n';
  }
}

}  // namespace rdeep
