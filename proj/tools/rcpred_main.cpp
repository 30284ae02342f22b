// rcpred: train echo-state reservoirs on chaotic systems and run long
// closed-loop predictions with rare true-state updates.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcpred/config.hpp"
#include "rcpred/errors.hpp"
#include "rcpred/experiment.hpp"
#include "rcpred/lyapunov.hpp"
#include "rcpred/metrics.hpp"
#include "rcpred/reservoir.hpp"
#include "rcpred/sweep.hpp"
#include "rcpred/trajectory.hpp"

namespace fs = std::filesystem;
using namespace rcpred;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out = "out";
  std::string format = "bin";
  long seed_override = -1;
  int workers = 0;
};

ExperimentConfig load_with_overrides(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config(opts.config_path);
  if (opts.seed_override >= 0)
    cfg.reservoir.seed = static_cast<std::uint64_t>(opts.seed_override);
  return cfg;
}

void write_traj(const TrajectoryBuffer& traj, const std::string& path,
                const std::string& format) {
  if (format == "csv")
    write_csv(traj, path + ".csv");
  else
    write_bin(traj, path + ".bin");
}

void emit_resolved(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_resolved_config(cfg, (dir / "config.json").string());
}

int cmd_simulate(const CommonOpts& opts, bool with_lyapunov) {
  ExperimentConfig cfg = load_with_overrides(opts);
  const fs::path dir(opts.out);
  emit_resolved(cfg, dir);
  const long total = cfg.training.n_steps + cfg.prediction.n_steps;
  TrajectoryBuffer truth = generate_truth(cfg.system, total);
  write_traj(truth, (dir / "truth").string(), opts.format);
  std::printf("wrote %ld steps x %ld channels (dt=%g) under %s\n", truth.steps(),
              truth.dim(), truth.dt, opts.out.c_str());
  if (with_lyapunov) {
    BenettinOptions bopts;
    bopts.renorm_interval = cfg.lyapunov.renorm_interval;
    LyapunovResult res;
    if (!cfg.system.is_pde) {
      const OdeSystem ode = cfg.system.make_ode_system();
      res = max_lyapunov_ode(ode, default_initial_condition(ode, cfg.system.ic_seed),
                             cfg.lyapunov.n_steps, bopts);
    } else if (cfg.system.name == "kse") {
      const PdeSystem pde = cfg.system.make_pde_system();
      res = max_lyapunov_kse(pde, default_initial_condition_kse(pde, cfg.system.ic_seed),
                             cfg.lyapunov.n_steps, bopts);
    } else {
      const PdeSystem pde = cfg.system.make_pde_system();
      res = max_lyapunov_cgle(pde, default_initial_condition_cgle(pde, cfg.system.ic_seed),
                              cfg.lyapunov.n_steps, bopts);
    }
    std::printf("lambda_max = %.6f (halves %.6f / %.6f)%s\n", res.exponent,
                res.first_half, res.second_half,
                res.converged ? "" : "  [not converged]");
  }
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path,
              const std::string& model_out) {
  ExperimentConfig cfg = load_with_overrides(opts);
  const fs::path dir(opts.out);
  emit_resolved(cfg, dir);

  ReservoirModel model = ReservoirModel::build(cfg.reservoir);
  TrajectoryBuffer traj;
  if (!data_path.empty()) {
    traj = read_trajectory(data_path, cfg.system.dt);
    if (traj.steps() > cfg.training.n_steps) traj = traj.slice(0, cfg.training.n_steps);
  } else {
    traj = generate_truth(cfg.system, cfg.training.n_steps);
  }
  const TrainReport report = model.train(traj, cfg.training.washout,
                                         cfg.training.input_noise, cfg.training.noise_seed);

  const std::string model_path =
      model_out.empty() ? (dir / "model.rcm").string() : model_out;
  model.save(model_path);

  nlohmann::json j;
  j["n_train_steps"] = report.n_train_steps;
  j["washout"] = report.washout;
  j["condition_estimate"] = report.condition_estimate;
  j["residual_rms"] = std::vector<double>(
      report.residual_rms.data(), report.residual_rms.data() + report.residual_rms.size());
  j["rebuild_attempts"] = model.rebuild_attempts();
  std::ofstream rf(dir / "train_report.json");
  rf << j.dump(2) << '\n';
  std::printf("trained %s (residual rms mean %.3e), model -> %s\n",
              cfg.system.name.c_str(), report.residual_rms.mean(), model_path.c_str());
  return 0;
}

int cmd_predict(const CommonOpts& opts, const std::string& model_path,
                const std::string& truth_path, bool no_schedule) {
  ExperimentConfig cfg = load_with_overrides(opts);
  if (no_schedule) cfg.schedule.reset();
  const fs::path dir(opts.out);
  emit_resolved(cfg, dir);

  Experiment exp;
  exp.config = cfg;
  if (!truth_path.empty()) {
    exp.truth = read_trajectory(truth_path, cfg.system.dt);
    if (exp.truth.steps() < cfg.training.n_steps + cfg.prediction.n_steps)
      throw ConfigError("supplied truth shorter than training + prediction window");
  } else {
    exp.truth = generate_truth(cfg.system, cfg.training.n_steps + cfg.prediction.n_steps);
  }
  if (!model_path.empty()) {
    exp.model = ReservoirModel::load(model_path);
  } else {
    exp.model = ReservoirModel::build(cfg.reservoir);
    exp.report = exp.model.train(exp.truth.slice(0, cfg.training.n_steps),
                                 cfg.training.washout, cfg.training.input_noise,
                                 cfg.training.noise_seed);
  }

  PredictionResult res = run_prediction(exp);
  write_traj(res.prediction, (dir / "prediction").string(), opts.format);
  write_error_csv(res.errors, (dir / "error_series.csv").string());
  if (cfg.system.is_pde)
    write_error_field_csv(res.prediction, exp.prediction_truth(),
                          (dir / "error_field.csv").string());

  const double hz = cfg.evaluation.lambda_max > 0
                        ? horizon(res.errors, cfg.evaluation.tolerance,
                                  cfg.evaluation.confirm_steps)
                        : -1.0;
  nlohmann::json j;
  j["delta_e"] = res.errors.delta_e;
  j["u_rms"] = res.errors.u_rms;
  j["horizon_steps"] = res.errors.horizon_steps;
  if (hz >= 0) j["horizon_lyapunov_times"] = std::isinf(hz) ? -1.0 : hz;
  j["horizon_breached"] = res.errors.horizon_steps >= 0;
  std::ofstream jf(dir / "prediction_report.json");
  jf << j.dump(2) << '\n';

  if (std::isinf(hz))
    std::printf("delta_e = %.6g, horizon: never exceeded tolerance\n", res.errors.delta_e);
  else
    std::printf("delta_e = %.6g, horizon = %.3f Lyapunov times\n", res.errors.delta_e, hz);
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts);
  if (!cfg.sweep) throw ConfigError("config has no sweep block");
  const fs::path dir = fs::path(opts.out) / cfg.hash_hex();
  emit_resolved(cfg, dir);
  const std::string cache = (fs::path(opts.out) / "cache").string();
  Experiment exp = prepare_experiment(cfg, cache);
  const int workers = opts.workers > 0 ? opts.workers : default_workers();
  SweepGrid grid = run_schedule_sweep(exp, *cfg.sweep, workers);
  write_sweep(grid, (dir / "delta_e").string());
  write_sweep_ppm(grid, (dir / "delta_e.ppm").string());
  std::printf("sweep %ldx%ld -> %s\n", grid.ny(), grid.nx(), dir.string().c_str());
  return 0;
}

int cmd_stability(const CommonOpts& opts) {
  ExperimentConfig cfg = load_with_overrides(opts);
  const fs::path dir = fs::path(opts.out) / cfg.hash_hex();
  emit_resolved(cfg, dir);
  const int workers = opts.workers > 0 ? opts.workers : default_workers();
  SweepGrid grid = run_stability_map(cfg, workers);
  write_sweep(grid, (dir / "transverse_lyapunov").string());
  std::printf("stability map %ldx%ld -> %s\n", grid.ny(), grid.nx(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echo-state reservoir prediction of chaotic systems with rare updates"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool with_lyapunov = false;
  std::string data_path, model_path, truth_path, model_out;
  bool no_schedule = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", opts.out, "output directory");
    cmd->add_option("--seed", opts.seed_override, "override reservoir seed");
    cmd->add_option("--workers", opts.workers, "worker threads (0 = hardware)");
    cmd->add_option("--format", opts.format, "trajectory format: csv|bin")
        ->check(CLI::IsMember({"csv", "bin"}));
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate ground-truth data");
  add_common(sim);
  sim->add_flag("--lyapunov", with_lyapunov, "also print the maximum Lyapunov exponent");

  CLI::App* train = app.add_subcommand("train", "build and train a reservoir");
  add_common(train);
  train->add_option("--data", data_path, "training trajectory (.bin or .csv)");
  train->add_option("--out-model", model_out, "model snapshot path");

  CLI::App* predict = app.add_subcommand("predict", "closed-loop prediction and errors");
  add_common(predict);
  predict->add_option("--model", model_path, "trained model snapshot");
  predict->add_option("--truth", truth_path, "ground-truth trajectory");
  predict->add_flag("--no-schedule", no_schedule, "ignore the config's schedule block");

  CLI::App* sweep = app.add_subcommand("sweep", "delta_e over a schedule parameter grid");
  add_common(sweep);

  CLI::App* stability = app.add_subcommand("stability", "transverse Lyapunov exponent map");
  add_common(stability);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(opts, with_lyapunov);
    if (train->parsed()) return cmd_train(opts, data_path, model_out);
    if (predict->parsed()) return cmd_predict(opts, model_path, truth_path, no_schedule);
    if (sweep->parsed()) return cmd_sweep(opts);
    if (stability->parsed()) return cmd_stability(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "numeric divergence: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
