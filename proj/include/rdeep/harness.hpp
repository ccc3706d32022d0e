#pragma once

#include "rdeep/common.hpp"
#include "rdeep/conic.hpp"
#include "rdeep/data_engine.hpp"
#include "rdeep/predictor.hpp"
#include "rdeep/reformulation.hpp"
#include "rdeep/traffic_sim.hpp"
#include "rdeep/uncertainty.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rdeep {

enum class ControllerKind { allhdv, baseline, robust };
enum class EstimatorKind { zero, constant, timevarying };
enum class RobustMethod { vertex, dual };

ControllerKind parse_controller(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);
RobustMethod parse_robust_method(const std::string& s);
std::string to_string(ControllerKind k);
std::string to_string(EstimatorKind k);
std::string to_string(RobustMethod m);

struct ControllerConfig {
  Index T_ini = 20;
  Index N = 50;
  CostWeights weights = CostWeights::standard(5);
  double s_min = 5.0;   // m
  double s_max = 40.0;  // m
  double u_min = -5.0;  // m/s^2
  double u_max = 2.0;   // m/s^2
  EstimatorKind estimator = EstimatorKind::timevarying;
  RobustMethod method = RobustMethod::dual;
  Index Ts = 12;  // 1 disables down-sampling
  Index equilibrium_window = 40;
  double dt = 0.05;
  int fallback_steps = 5;
  SolverOptions solver;

  void validate(Index n) const;
};

struct Equilibrium {
  double v_star = 0.0;
  double s_star = 0.0;
  double s_tilde_min = 0.0;
  double s_tilde_max = 0.0;
};

/// Mean of the last `window` head velocities, clamped into (0, v_max), mapped through the OVM equilibrium.
Equilibrium estimate_equilibrium(const std::vector<double>& head_velocity, std::size_t window,
                                 const OvmParams& ovm = {}, double s_min = 5.0, double s_max = 40.0);

struct SafetyReport {
  bool violation = false;
  bool emergency = false;
  bool collision = false;
  double min_spacing = 0.0;
  double max_spacing = 0.0;
};

SafetyReport classify_safety(const std::vector<double>& spacing, double s_min, double s_max);

struct ControlOutcome {
  double u = 0.0;  // input to apply
  Vector u_sequence;
  bool fallback = false;
  SolveStatus status = SolveStatus::numerical_failure;
  double solve_time = 0.0;
  int iterations = 0;
  double objective = 0.0;
  Index num_vars = 0;
  Index num_constraints = 0;
  double eps_min0 = 0.0;  // first coordinate of the disturbance set
  double eps_max0 = 0.0;
  std::string diagnostics;
};

/// One data-driven controller bound to one offline dataset.
class Controller {
public:
  Controller(const HankelBlocks& blocks, ControllerKind kind, const ControllerConfig& cfg);

  /// Solves one receding-horizon problem; on failure returns the fallback input instead.
  ControlOutcome control_step(const InitialWindow& ini, const ConstraintBounds& bounds, double ovm_accel);

  /// Disturbance set the robust controller would use for this window.
  DisturbancePolytope disturbance_set(const Vector& e_ini) const;

  ControllerKind kind() const { return kind_; }
  const ControllerConfig& config() const { return cfg_; }
  const HankelDims& dims() const { return dims_; }

private:
  ControllerKind kind_;
  ControllerConfig cfg_;
  HankelDims dims_;
  std::optional<BaselineBuilder> baseline_;
  std::optional<Reducer> reducer_;
  SolverWorkspace ws_;
  double prev_u_ = 0.0;
  int fallback_run_ = 0;
};

struct RunConfig {
  ControllerKind controller = ControllerKind::robust;
  ControllerConfig ctrl;
  SimConfig sim;
  ScenarioScript script = ScenarioScript::brake(0.05);
  std::uint64_t seed = 0;
  bool record_trajectory = true;
};

struct StepLog {
  double t = 0.0;
  bool controlled = false;  // false during warm-up
  double u = 0.0;
  bool fallback = false;
  SolveStatus status = SolveStatus::optimal;
  double solve_time = 0.0;
  int iterations = 0;
  double v_star = 0.0;
  double s_star = 0.0;
  double eps_min0 = 0.0;
  double eps_max0 = 0.0;
};

struct RunResult {
  std::vector<TrajectoryRow> trajectory;
  std::vector<StepLog> steps;
  std::vector<double> cav_spacing;     // one entry per simulated step, before the step
  std::vector<double> cf_fuel;         // mL consumed per step by the CAV and its followers
  std::vector<double> head_velocity;
  SafetyReport safety;
  bool collision = false;
  long steps_run = 0;
  int fallbacks = 0;
  double total_solve_time = 0.0;
  double max_solve_time = 0.0;
};

/// Algorithm loop: warm-up under the OVM law for T_ini steps, then closed loop until the script ends.
RunResult run_receding_horizon(const RunConfig& cfg, const OfflineDataset* data);

struct PhaseFuel {
  std::vector<std::string> cases;          // controller names
  std::vector<std::vector<double>> fuel;   // [case][phase], mL
  std::vector<double> total;               // [case], mL
  std::vector<bool> collision;             // [case]
};

struct ExperimentAConfig {
  ControllerConfig ctrl;
  SimConfig sim;
  std::uint64_t seed = 1;
};

/// Fuel of the CAV and its followers per scenario phase, initial cruise excluded.
PhaseFuel experiment_a(const ExperimentAConfig& cfg, const OfflineDataset& data);
void write_fuel_table_csv(std::ostream& out, const PhaseFuel& table);

struct ExperimentBConfig {
  ControllerConfig ctrl;
  SimConfig sim;
  CollectionConfig collection;
  Index T = 1500;
  int trials = 100;
  std::uint64_t base_seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  double cruise = 4.0;
  double final_hold = 8.0;
  std::vector<ControllerKind> controllers{ControllerKind::baseline, ControllerKind::robust};
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  bool dataset_ok = true;
  std::string error;
  std::vector<SafetyReport> safety;  // per controller
  std::vector<int> fallbacks;        // per controller
};

struct ExperimentBResult {
  std::vector<ControllerKind> controllers;
  std::vector<TrialOutcome> trials;
  std::vector<double> violation_rate;  // per controller
  std::vector<double> emergency_rate;
  std::vector<int> collisions;
  int valid_trials = 0;
};

ExperimentBResult experiment_b(const ExperimentBConfig& cfg);
void write_experiment_b_csv(std::ostream& out, const ExperimentBResult& r);

}  // namespace rdeep
