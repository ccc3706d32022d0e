#include "rdeep/harness.hpp"
#include "rdeep/report.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace rdeep;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw FormatError("cannot open " + p.string() + " for writing");
  return f;
}

struct ControllerFlags {
  std::string config, method, estimator;
  long Ts = 0;
  CLI::Option* ts_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--config", config, "key = value file mirroring the controller settings")->check(CLI::ExistingFile);
    app->add_option("--method", method, "robust reformulation")->check(CLI::IsMember({"vertex", "dual"}));
    app->add_option("--estimator", estimator, "disturbance estimator")
        ->check(CLI::IsMember({"zero", "constant", "timevarying"}));
    ts_opt = app->add_option("--Ts", Ts, "disturbance down-sampling period (1 disables)")->check(CLI::PositiveNumber);
  }

  ControllerConfig resolve() const {
    ControllerConfig c;
    if (!config.empty()) apply_config_file(config, c);
    if (!method.empty()) c.method = parse_robust_method(method);
    if (!estimator.empty()) c.estimator = parse_estimator(estimator);
    if (ts_opt->count()) c.Ts = Ts;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust data-driven control of a mixed-traffic platoon"};
  app.require_subcommand(1);

  // collect
  auto* collect = app.add_subcommand("collect", "record an offline dataset");
  long c_T = 1500;
  std::uint64_t c_seed = 1;
  std::string c_out;
  collect->add_option("--T", c_T, "number of samples")->check(CLI::PositiveNumber);
  collect->add_option("--seed", c_seed, "RNG seed");
  collect->add_option("--out", c_out, "output CSV")->required();

  // run
  auto* run = app.add_subcommand("run", "closed-loop simulation of one scenario");
  std::string r_scenario = "brake", r_controller = "robust", r_data, r_out = "out";
  long r_T = 1500;
  std::uint64_t r_seed = 1;
  bool r_plot = false;
  ControllerFlags r_flags;
  run->add_option("--scenario", r_scenario)->check(CLI::IsMember({"nedc", "brake"}));
  run->add_option("--controller", r_controller)->check(CLI::IsMember({"allhdv", "baseline", "robust"}));
  run->add_option("--data", r_data, "offline dataset CSV (collected on the fly when omitted)");
  run->add_option("--T", r_T, "dataset length when collecting on the fly")->check(CLI::PositiveNumber);
  run->add_option("--seed", r_seed, "simulation seed (also the collection seed)");
  run->add_option("--out", r_out, "output directory");
  run->add_flag("--plot", r_plot, "write SVG velocity and spacing charts");
  r_flags.add(run);

  // batch-b
  auto* batch = app.add_subcommand("batch-b", "braking-scenario safety statistics over seeded datasets");
  int b_trials = 100;
  long b_T = 1500;
  std::uint64_t b_seed = 1;
  unsigned b_threads = 0;
  std::string b_out;
  ControllerFlags b_flags;
  batch->add_option("--trials", b_trials)->check(CLI::PositiveNumber);
  batch->add_option("--T", b_T)->check(CLI::PositiveNumber);
  batch->add_option("--seed", b_seed, "base seed; trial i uses seed + i");
  batch->add_option("--threads", b_threads, "worker threads (0: all cores)");
  batch->add_option("--out", b_out, "per-trial CSV");
  b_flags.add(batch);

  // fuel
  auto* fuel = app.add_subcommand("fuel", "per-phase fuel of the driving-cycle scenario");
  std::string f_data, f_out;
  long f_T = 1500;
  std::uint64_t f_seed = 1;
  ControllerFlags f_flags;
  fuel->add_option("--data", f_data, "offline dataset CSV (collected on the fly when omitted)");
  fuel->add_option("--T", f_T)->check(CLI::PositiveNumber);
  fuel->add_option("--seed", f_seed);
  fuel->add_option("--out", f_out, "table CSV (stdout when omitted)");
  f_flags.add(fuel);

  // complexity
  auto* cx = app.add_subcommand("complexity", "variable and constraint counts of a reformulation");
  std::string x_method = "M2";
  std::uint64_t x_n = 5, x_Tini = 20, x_N = 50, x_neps = 6;
  cx->add_option("--method", x_method)->check(CLI::IsMember({"M1", "M2", "M1L", "M2L"}));
  cx->add_option("--n", x_n, "followers behind the CAV plus one");
  cx->add_option("--T_ini", x_Tini);
  cx->add_option("--N", x_N);
  cx->add_option("--n_eps", x_neps, "disturbance coordinates");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*collect) {
      const OfflineDataset d = collect_offline_data(CollectionConfig{}, c_T, c_seed);
      write_dataset_csv(c_out, d);
      std::cout << "wrote " << d.length() << " samples to " << c_out << '\n';
    } else if (*run) {
      RunConfig rc;
      rc.controller = parse_controller(r_controller);
      rc.ctrl = r_flags.resolve();
      rc.seed = r_seed;
      rc.script = r_scenario == "nedc" ? ScenarioScript::nedc(rc.sim.dt) : ScenarioScript::brake(rc.sim.dt);
      std::optional<OfflineDataset> data;
      if (rc.controller != ControllerKind::allhdv) {
        const Index n = rc.sim.n_followers + 1;
        data = r_data.empty() ? collect_offline_data(CollectionConfig{}, r_T, r_seed) : read_dataset_csv(r_data, n);
      }
      const RunResult r = run_receding_horizon(rc, data ? &*data : nullptr);
      fs::create_directories(r_out);
      {
        auto f = open_out(fs::path(r_out) / "trajectory.csv");
        write_trajectory_csv(f, r.trajectory);
      }
      const SummaryRows rows = run_summary(rc, r);
      {
        auto f = open_out(fs::path(r_out) / "summary.csv");
        write_summary_csv(f, rows);
      }
      if (r_plot) {
        auto fv = open_out(fs::path(r_out) / "velocity.svg");
        write_svg_chart(fv, r_scenario + ", " + r_controller, "t [s]", "velocity [m/s]",
                        trajectory_series(r.trajectory, false));
        auto fs_ = open_out(fs::path(r_out) / "spacing.svg");
        write_svg_chart(fs_, r_scenario + ", " + r_controller, "t [s]", "spacing [m]",
                        trajectory_series(r.trajectory, true));
      }
      write_summary_csv(std::cout, rows);
    } else if (*batch) {
      ExperimentBConfig cfg;
      cfg.ctrl = b_flags.resolve();
      cfg.T = b_T;
      cfg.trials = b_trials;
      cfg.base_seed = b_seed;
      cfg.threads = b_threads;
      const ExperimentBResult r = experiment_b(cfg);
      if (!b_out.empty()) {
        auto f = open_out(b_out);
        write_experiment_b_csv(f, r);
      }
      std::cout << "controller,violation_rate,emergency_rate,collisions\n";
      for (std::size_t c = 0; c < r.controllers.size(); ++c)
        std::cout << to_string(r.controllers[c]) << ',' << r.violation_rate[c] << ',' << r.emergency_rate[c] << ','
                  << r.collisions[c] << '\n';
      if (r.valid_trials < cfg.trials)
        std::cerr << cfg.trials - r.valid_trials << " trial(s) lost their dataset to a collection failure\n";
    } else if (*fuel) {
      ExperimentAConfig cfg;
      cfg.ctrl = f_flags.resolve();
      cfg.seed = f_seed;
      const Index n = cfg.sim.n_followers + 1;
      const OfflineDataset d =
          f_data.empty() ? collect_offline_data(CollectionConfig{}, f_T, f_seed) : read_dataset_csv(f_data, n);
      const PhaseFuel t = experiment_a(cfg, d);
      if (f_out.empty()) {
        write_fuel_table_csv(std::cout, t);
      } else {
        auto f = open_out(f_out);
        write_fuel_table_csv(f, t);
      }
    } else if (*cx) {
      const Complexity c = complexity(parse_method(x_method), {x_n, x_Tini, x_N, x_neps});
      std::cout << "method,num_vars,num_constraints\n"
                << x_method << ',' << c.num_vars << ',' << c.num_constraints << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
