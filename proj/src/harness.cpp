#include "rdeep/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <thread>

namespace rdeep {

ControllerKind parse_controller(const std::string& s) {
  if (s == "allhdv") return ControllerKind::allhdv;
  if (s == "baseline") return ControllerKind::baseline;
  if (s == "robust") return ControllerKind::robust;
  throw ValueError("unknown controller '" + s + "' (expected allhdv, baseline or robust)");
}

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "zero") return EstimatorKind::zero;
  if (s == "constant") return EstimatorKind::constant;
  if (s == "timevarying") return EstimatorKind::timevarying;
  throw ValueError("unknown estimator '" + s + "' (expected zero, constant or timevarying)");
}

RobustMethod parse_robust_method(const std::string& s) {
  if (s == "vertex") return RobustMethod::vertex;
  if (s == "dual") return RobustMethod::dual;
  throw ValueError("unknown method '" + s + "' (expected vertex or dual)");
}

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::allhdv: return "allhdv";
    case ControllerKind::baseline: return "baseline";
    case ControllerKind::robust: return "robust";
  }
  return "?";
}

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::zero: return "zero";
    case EstimatorKind::constant: return "constant";
    case EstimatorKind::timevarying: return "timevarying";
  }
  return "?";
}

std::string to_string(RobustMethod m) { return m == RobustMethod::vertex ? "vertex" : "dual"; }

void ControllerConfig::validate(Index n) const {
  require_value(T_ini >= 3 && N >= 2, "ControllerConfig: need T_ini >= 3 and N >= 2");
  weights.validate(n);
  require_value(s_min < s_max, "ControllerConfig: s_min must be below s_max");
  require_value(u_min < u_max, "ControllerConfig: u_min must be below u_max");
  require_value(Ts >= 1 && Ts <= N, "ControllerConfig: Ts must lie in [1, N]");
  require_value(equilibrium_window >= 1, "ControllerConfig: equilibrium window must be positive");
  require_value(dt > 0.0, "ControllerConfig: dt must be positive");
  require_value(fallback_steps >= 1, "ControllerConfig: fallback_steps must be positive");
}

Equilibrium estimate_equilibrium(const std::vector<double>& hv, std::size_t window, const OvmParams& ovm, double s_min,
                                 double s_max) {
  require_value(!hv.empty(), "estimate_equilibrium: empty history");
  require_value(window >= 1 && window <= hv.size(), "estimate_equilibrium: window exceeds history");
  double sum = 0.0;
  for (std::size_t i = hv.size() - window; i < hv.size(); ++i) sum += hv[i];
  Equilibrium eq;
  eq.v_star = std::clamp(sum / static_cast<double>(window), 0.1, ovm.v_max - 0.1);
  eq.s_star = equilibrium_spacing(eq.v_star, ovm);
  eq.s_tilde_min = s_min - eq.s_star;
  eq.s_tilde_max = s_max - eq.s_star;
  return eq;
}

SafetyReport classify_safety(const std::vector<double>& spacing, double s_min, double s_max) {
  SafetyReport r;
  if (spacing.empty()) return r;
  const auto [lo, hi] = std::minmax_element(spacing.begin(), spacing.end());
  r.min_spacing = *lo;
  r.max_spacing = *hi;
  r.collision = r.min_spacing <= 0.0;
  r.emergency = r.collision || r.min_spacing < s_min - 5.0 || r.max_spacing > s_max + 5.0;
  r.violation = r.emergency || r.min_spacing < s_min - 1.0 || r.max_spacing > s_max + 1.0;
  return r;
}

// ---------------------------------------------------------------------------

Controller::Controller(const HankelBlocks& blocks, ControllerKind kind, const ControllerConfig& cfg)
    : kind_(kind), cfg_(cfg), dims_(blocks.dims) {
  cfg.validate(blocks.dims.n);
  require_dims(blocks.dims.T_ini == cfg.T_ini && blocks.dims.N == cfg.N, "Controller: Hankel depth differs from config");
  if (kind == ControllerKind::baseline) {
    baseline_.emplace(blocks, cfg.weights);
  } else if (kind == ControllerKind::robust) {
    std::optional<DownsampleMap> ds;
    if (cfg.Ts > 1) ds = downsample_map(cfg.N, cfg.Ts);
    reducer_.emplace(std::make_shared<const PredictorCore>(assemble_core(blocks)), cfg.weights, ds);
  } else {
    throw ValueError("Controller: the all-HDV case has no controller");
  }
}

DisturbancePolytope Controller::disturbance_set(const Vector& e_ini) const {
  DisturbancePolytope w;
  switch (cfg_.estimator) {
    case EstimatorKind::zero: w = zero_polytope(cfg_.N); break;
    case EstimatorKind::constant: w = estimate_constant_bounds(e_ini, cfg_.N); break;
    case EstimatorKind::timevarying: w = estimate_timevarying_bounds(e_ini, cfg_.N, cfg_.dt); break;
  }
  return cfg_.Ts > 1 ? apply_downsampling(w, cfg_.Ts) : w;
}

ControlOutcome Controller::control_step(const InitialWindow& ini, const ConstraintBounds& bounds, double ovm_accel) {
  ControlOutcome out;
  Solution sol;
  if (baseline_) {
    const ConicProgram prog = baseline_->build(ini, bounds);
    out.num_vars = prog.num_vars;
    out.num_constraints = prog.num_constraint_rows();
    sol = solve(prog, cfg_.solver, ws_);
    if (sol.optimal()) out.u_sequence = baseline_->inputs(sol.x);
  } else {
    const DisturbancePolytope w = disturbance_set(ini.e_ini);
    out.eps_min0 = w.eps_min(0);
    out.eps_max0 = w.eps_max(0);
    const ReducedProblem rp = reducer_->reduce(ini, bounds);
    const ConicProgram prog = cfg_.method == RobustMethod::vertex ? vertex_program(rp, w) : dual_program(rp, w);
    out.num_vars = prog.num_vars;
    out.num_constraints = prog.num_constraint_rows();
    sol = solve(prog, cfg_.solver, ws_);
    if (sol.optimal()) out.u_sequence = sol.x.head(cfg_.N);
  }
  out.status = sol.status;
  out.solve_time = sol.solve_time;
  out.iterations = sol.iterations;
  out.objective = sol.objective_value;
  out.diagnostics = sol.diagnostics;
  if (sol.optimal()) {
    out.u = std::clamp(out.u_sequence(0), bounds.u_min, bounds.u_max);
    fallback_run_ = 0;
  } else {
    // Hold the previous input and blend it toward the human-driver law.
    ++fallback_run_;
    const double w = std::min(1.0, static_cast<double>(fallback_run_) / cfg_.fallback_steps);
    out.u = std::clamp((1.0 - w) * prev_u_ + w * ovm_accel, bounds.u_min, bounds.u_max);
    out.fallback = true;
  }
  prev_u_ = out.u;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct History {
  std::vector<double> u, head_v, s_cav;
  std::vector<Vector> v_cf;  // CAV and followers

  InitialWindow window(Index T_ini, double v_star, double s_star) const {
    const std::size_t k0 = u.size() - static_cast<std::size_t>(T_ini);
    const Index p = v_cf.front().size() + 1;
    InitialWindow w{Vector(T_ini), Vector(T_ini), Vector(p * T_ini)};
    for (Index i = 0; i < T_ini; ++i) {
      const std::size_t k = k0 + static_cast<std::size_t>(i);
      w.u_ini(i) = u[k];
      w.e_ini(i) = head_v[k] - v_star;
      w.y_ini.segment(i * p, p - 1) = v_cf[k].array() - v_star;
      w.y_ini(i * p + p - 1) = s_cav[k] - s_star;
    }
    return w;
  }
};

}  // namespace

RunResult run_receding_horizon(const RunConfig& cfg, const OfflineDataset* data) {
  RunResult res;
  TrafficSimulator sim(cfg.sim, cfg.script, cfg.seed);
  const ControllerConfig& cc = cfg.ctrl;
  require_value(std::abs(cc.dt - cfg.sim.dt) < 1e-12, "run_receding_horizon: controller dt differs from sim dt");

  std::optional<Controller> ctrl;
  if (cfg.controller != ControllerKind::allhdv) {
    require_value(data != nullptr, "run_receding_horizon: controller needs an offline dataset");
    require_dims(data->n() == cfg.sim.n_followers + 1, "run_receding_horizon: dataset output count differs from platoon");
    ctrl.emplace(partition(data->u, data->e, data->y, cc.T_ini, cc.N), cfg.controller, cc);
  }

  const std::size_t head = sim.head_index(), cav = sim.cav_index(), nveh = sim.size();
  const Index ncf = static_cast<Index>(nveh - cav);
  History hist;
  const long total = cfg.script.total_steps();
  res.steps.reserve(static_cast<std::size_t>(total));

  for (long k = 0; k < total; ++k) {
    const std::vector<VehicleState> st = sim.states();
    std::vector<double> gaps(nveh);
    for (std::size_t i = 0; i < nveh; ++i) gaps[i] = sim.spacing(i);
    hist.head_v.push_back(st[head].velocity);
    hist.s_cav.push_back(gaps[cav]);
    Vector vcf(ncf);
    for (Index i = 0; i < ncf; ++i) vcf(i) = st[cav + static_cast<std::size_t>(i)].velocity;
    hist.v_cf.push_back(vcf);
    res.cav_spacing.push_back(gaps[cav]);
    res.head_velocity.push_back(st[head].velocity);

    const Equilibrium eq = estimate_equilibrium(
        hist.head_v, std::min<std::size_t>(static_cast<std::size_t>(cc.equilibrium_window), hist.head_v.size()),
        cfg.sim.ovm, cc.s_min, cc.s_max);

    StepLog log;
    log.t = sim.time();
    log.v_star = eq.v_star;
    log.s_star = eq.s_star;
    StepResult sr;
    if (!ctrl) {
      sr = sim.step(0.0, true);
    } else if (static_cast<Index>(hist.u.size()) < cc.T_ini) {
      sr = sim.step(sim.cav_ovm_acceleration());
    } else {
      const InitialWindow ini = hist.window(cc.T_ini, eq.v_star, eq.s_star);
      const ConstraintBounds b{eq.s_tilde_min, eq.s_tilde_max, cc.u_min, cc.u_max};
      const ControlOutcome co = ctrl->control_step(ini, b, sim.cav_ovm_acceleration());
      log.controlled = true;
      log.fallback = co.fallback;
      log.status = co.status;
      log.solve_time = co.solve_time;
      log.iterations = co.iterations;
      log.eps_min0 = co.eps_min0;
      log.eps_max0 = co.eps_max0;
      res.fallbacks += co.fallback ? 1 : 0;
      res.total_solve_time += co.solve_time;
      res.max_solve_time = std::max(res.max_solve_time, co.solve_time);
      sr = sim.step(co.u);
    }
    hist.u.push_back(sr.accel[cav]);
    log.u = sr.accel[cav];

    double fuel = 0.0;
    for (std::size_t i = cav; i < nveh; ++i) fuel += fuel_rate(st[i].velocity, sr.accel[i]) * cfg.sim.dt;
    res.cf_fuel.push_back(fuel);
    if (cfg.record_trajectory) {
      for (std::size_t i = 0; i < nveh; ++i)
        res.trajectory.push_back({log.t, static_cast<int>(i) - static_cast<int>(head), st[i].role, st[i].position,
                                  st[i].velocity, sr.accel[i], gaps[i], fuel_rate(st[i].velocity, sr.accel[i])});
    }
    res.steps.push_back(log);
    ++res.steps_run;
    if (sr.collision) {
      res.collision = true;
      res.cav_spacing.push_back(sim.spacing(cav));
      break;
    }
  }
  res.safety = classify_safety(res.cav_spacing, cc.s_min, cc.s_max);
  return res;
}

// ---------------------------------------------------------------------------

PhaseFuel experiment_a(const ExperimentAConfig& cfg, const OfflineDataset& data) {
  const ScenarioScript script = ScenarioScript::nedc(cfg.sim.dt);
  const auto& marks = script.marks();
  require_value(marks.size() >= 2, "experiment_a: scenario needs phase marks");
  PhaseFuel table;
  for (ControllerKind k : {ControllerKind::allhdv, ControllerKind::baseline, ControllerKind::robust}) {
    RunConfig rc;
    rc.controller = k;
    rc.ctrl = cfg.ctrl;
    rc.sim = cfg.sim;
    rc.script = script;
    rc.seed = cfg.seed;
    rc.record_trajectory = false;
    const RunResult r = run_receding_horizon(rc, &data);
    std::vector<double> phases(marks.size() - 1, 0.0);
    for (std::size_t p = 0; p + 1 < marks.size(); ++p)
      for (long s = marks[p]; s < marks[p + 1] && s < static_cast<long>(r.cf_fuel.size()); ++s)
        phases[p] += r.cf_fuel[static_cast<std::size_t>(s)];
    double total = 0.0;
    for (double f : phases) total += f;
    table.cases.push_back(to_string(k));
    table.fuel.push_back(phases);
    table.total.push_back(total);
    table.collision.push_back(r.collision);
  }
  return table;
}

void write_fuel_table_csv(std::ostream& out, const PhaseFuel& t) {
  out << "phase";
  for (const auto& c : t.cases) out << ',' << c;
  for (std::size_t c = 1; c < t.cases.size(); ++c) out << ',' << t.cases[c] << "_pct";
  out << '\n' << std::setprecision(10);
  const std::size_t nph = t.fuel.empty() ? 0 : t.fuel.front().size();
  auto row = [&](const std::string& name, auto value) {
    out << name;
    for (std::size_t c = 0; c < t.cases.size(); ++c) out << ',' << value(c);
    for (std::size_t c = 1; c < t.cases.size(); ++c) out << ',' << 100.0 * (value(c) - value(0)) / value(0);
    out << '\n';
  };
  for (std::size_t p = 0; p < nph; ++p) row("phase" + std::to_string(p + 1), [&](std::size_t c) { return t.fuel[c][p]; });
  row("total", [&](std::size_t c) { return t.total[c]; });
}

ExperimentBResult experiment_b(const ExperimentBConfig& cfg) {
  require_value(cfg.trials >= 1, "experiment_b: need at least one trial");
  ExperimentBResult res;
  res.controllers = cfg.controllers;
  res.trials.resize(static_cast<std::size_t>(cfg.trials));
  const ScenarioScript script = ScenarioScript::brake(cfg.sim.dt, cfg.cruise, cfg.final_hold);
  CollectionConfig coll = cfg.collection;
  coll.sim = cfg.sim;

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < cfg.trials; t = next++) {
      TrialOutcome& out = res.trials[static_cast<std::size_t>(t)];
      out.seed = cfg.base_seed + static_cast<std::uint64_t>(t);
      try {
        const OfflineDataset data = collect_offline_data(coll, cfg.T, out.seed);
        for (ControllerKind k : cfg.controllers) {
          RunConfig rc;
          rc.controller = k;
          rc.ctrl = cfg.ctrl;
          rc.sim = cfg.sim;
          rc.script = script;
          rc.seed = out.seed;
          rc.record_trajectory = false;
          const RunResult r = run_receding_horizon(rc, &data);
          out.safety.push_back(r.safety);
          out.fallbacks.push_back(r.fallbacks);
        }
      } catch (const SimulationError& e) {
        out.dataset_ok = false;
        out.error = e.what();
      }
    }
  };
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(cfg.trials));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  const std::size_t nc = cfg.controllers.size();
  std::vector<int> viol(nc, 0), emerg(nc, 0);
  res.collisions.assign(nc, 0);
  for (const TrialOutcome& t : res.trials) {
    if (!t.dataset_ok) continue;
    ++res.valid_trials;
    for (std::size_t c = 0; c < nc; ++c) {
      viol[c] += t.safety[c].violation ? 1 : 0;
      emerg[c] += t.safety[c].emergency ? 1 : 0;
      res.collisions[c] += t.safety[c].collision ? 1 : 0;
    }
  }
  const double denom = cfg.trials;
  for (std::size_t c = 0; c < nc; ++c) {
    res.violation_rate.push_back(viol[c] / denom);
    res.emergency_rate.push_back(emerg[c] / denom);
  }
  return res;
}

void write_experiment_b_csv(std::ostream& out, const ExperimentBResult& r) {
  out << "trial,seed,controller,violation,emergency,collision,min_spacing,max_spacing,fallbacks\n"
      << std::setprecision(10);
  for (std::size_t t = 0; t < r.trials.size(); ++t) {
    const TrialOutcome& o = r.trials[t];
    if (!o.dataset_ok) {
      out << t << ',' << o.seed << ",dataset_failed,,,,,,\n";
      continue;
    }
    for (std::size_t c = 0; c < r.controllers.size(); ++c) {
      const SafetyReport& s = o.safety[c];
      out << t << ',' << o.seed << ',' << to_string(r.controllers[c]) << ',' << s.violation << ',' << s.emergency << ','
          << s.collision << ',' << s.min_spacing << ',' << s.max_spacing << ',' << o.fallbacks[c] << '\n';
    }
  }
}

}  // namespace rdeep
