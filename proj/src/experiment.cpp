#include "rcpred/experiment.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "rcpred/errors.hpp"
#include "rcpred/lyapunov.hpp"
#include "rcpred/rng.hpp"

namespace rcpred {

namespace fs = std::filesystem;
using nlohmann::json;

TrajectoryBuffer generate_truth(const SystemConfig& sys, long n_steps) {
  if (!sys.is_pde) {
    const OdeSystem ode = sys.make_ode_system();
    return integrate_ode(ode, default_initial_condition(ode, sys.ic_seed), n_steps,
                         sys.discard);
  }
  const PdeSystem pde = sys.make_pde_system();
  if (sys.name == "kse")
    return integrate_kse(pde, default_initial_condition_kse(pde, sys.ic_seed), n_steps,
                         sys.discard);
  return integrate_cgle(pde, default_initial_condition_cgle(pde, sys.ic_seed), n_steps,
                        sys.discard);
}

Eigen::MatrixXd Experiment::warmup_block() const {
  const long n_train = config.training.n_steps;
  const long w = config.prediction.warmup;
  return truth.data.middleRows(n_train - w, w);
}

TrajectoryBuffer Experiment::prediction_truth() const {
  return truth.slice(config.training.n_steps, config.prediction.n_steps);
}

namespace {

std::string partial_hash(const ExperimentConfig& cfg, bool include_reservoir) {
  json j;
  j["system"] = json::parse(cfg.canonical_json())["system"];
  j["total_steps"] = cfg.training.n_steps + cfg.prediction.n_steps;
  if (include_reservoir) {
    const json full = json::parse(cfg.canonical_json());
    j["reservoir"] = full["reservoir"];
    j["training"] = full["training"];
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

}  // namespace

Experiment prepare_experiment(const ExperimentConfig& cfg, const std::string& cache_dir) {
  Experiment exp;
  exp.config = cfg;
  const long total = cfg.training.n_steps + cfg.prediction.n_steps;

  std::string truth_path, model_path;
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    truth_path = (fs::path(cache_dir) / ("truth_" + partial_hash(cfg, false) + ".bin")).string();
    model_path = (fs::path(cache_dir) / ("model_" + partial_hash(cfg, true) + ".rcm")).string();
  }

  if (!truth_path.empty() && fs::exists(truth_path)) {
    exp.truth = read_bin(truth_path);
  } else {
    exp.truth = generate_truth(cfg.system, total);
    if (!truth_path.empty()) write_bin(exp.truth, truth_path);
  }
  if (exp.truth.steps() < total) throw ConfigError("cached truth shorter than required");

  const bool have_model = !model_path.empty() && fs::exists(model_path);
  if (have_model) {
    exp.model = ReservoirModel::load(model_path);
    std::ifstream rf(model_path + ".report");
    if (rf) {
      json j = json::parse(rf);
      exp.report.n_train_steps = j.at("n_train_steps").get<long>();
      exp.report.washout = j.at("washout").get<long>();
      exp.report.condition_estimate = j.at("condition_estimate").get<double>();
      const auto rr = j.at("residual_rms").get<std::vector<double>>();
      exp.report.residual_rms =
          Eigen::Map<const Eigen::VectorXd>(rr.data(), static_cast<long>(rr.size()));
    }
  } else {
    ReservoirParams params = cfg.reservoir;
    exp.model = ReservoirModel::build(params);
    TrajectoryBuffer train_slice = exp.truth.slice(0, cfg.training.n_steps);
    exp.report = exp.model.train(train_slice, cfg.training.washout,
                                 cfg.training.input_noise, cfg.training.noise_seed);
    if (!model_path.empty()) {
      exp.model.save(model_path);
      json j;
      j["n_train_steps"] = exp.report.n_train_steps;
      j["washout"] = exp.report.washout;
      j["condition_estimate"] = exp.report.condition_estimate;
      j["residual_rms"] = std::vector<double>(
          exp.report.residual_rms.data(),
          exp.report.residual_rms.data() + exp.report.residual_rms.size());
      std::ofstream rf(model_path + ".report");
      rf << j.dump() << '\n';
    }
  }
  return exp;
}

PredictionResult run_prediction(const Experiment& exp, const UpdateSchedule* schedule_override,
                                long n_steps_override) {
  const ExperimentConfig& cfg = exp.config;
  const long n = n_steps_override > 0 ? n_steps_override : cfg.prediction.n_steps;
  if (n > cfg.prediction.n_steps)
    throw ConfigError("prediction override longer than available truth");
  const UpdateSchedule* schedule =
      schedule_override ? schedule_override : (cfg.schedule ? &*cfg.schedule : nullptr);

  TrajectoryBuffer truth_slice = exp.truth.slice(cfg.training.n_steps, n);
  PredictionResult result;
  result.prediction = exp.model.predict_closed_loop(exp.warmup_block(), n, schedule,
                                                    schedule ? &truth_slice : nullptr);
  result.prediction.dt = truth_slice.dt;
  result.prediction.channels = truth_slice.channels;
  result.prediction.channels_per_site = truth_slice.channels_per_site;

  ErrorOptions opts;
  opts.tolerance = cfg.evaluation.tolerance;
  opts.confirm_steps = cfg.evaluation.confirm_steps;
  opts.window_lyapunov_times = cfg.evaluation.window_lyapunov_times;
  result.errors = error_series(result.prediction, truth_slice, cfg.evaluation.lambda_max, opts);
  return result;
}

namespace {

UpdateSchedule cell_schedule(const UpdateSchedule& base, const SweepAxis& ax, double xv,
                             const SweepAxis& ay, double yv, std::uint64_t rep_seed) {
  UpdateSchedule s = base;
  auto apply = [&](const std::string& param, double v) {
    if (param == "T") s.T = static_cast<long>(v);
    else if (param == "T0") s.T0 = static_cast<long>(v);
    else if (param == "p_t") s.p_t = v;
    else if (param == "p_s") s.p_s = v;
  };
  apply(ax.param, xv);
  apply(ay.param, yv);
  if (s.mode == UpdateSchedule::Mode::Random) s.seed = rep_seed;
  return s;
}

}  // namespace

SweepGrid run_schedule_sweep(const Experiment& exp, const SweepConfig& sweep, int workers) {
  const ExperimentConfig& cfg = exp.config;
  if (!cfg.schedule)
    throw ConfigError("sweep requires a schedule block as the cell template");
  const UpdateSchedule& base = *cfg.schedule;
  const bool random_mode = base.mode == UpdateSchedule::Mode::Random;
  const int reps = random_mode ? sweep.schedule_seeds : 1;

  SweepGrid grid;
  grid.init(sweep.x.param, sweep.y.param, sweep.x.values, sweep.y.values);
  const long cells = grid.nx() * grid.ny();
  const double ceiling = 10.0;

  std::atomic<long> next{0};
  auto work = [&]() {
    while (true) {
      const long idx = next.fetch_add(1);
      if (idx >= cells) break;
      const long iy = idx / grid.nx();
      const long ix = idx % grid.nx();
      const double xv = grid.x_values[ix];
      const double yv = grid.y_values[iy];
      // undefined corner of the regular plane
      if (!random_mode) {
        long T = base.T, T0 = base.T0;
        if (sweep.x.param == "T") T = static_cast<long>(xv);
        if (sweep.x.param == "T0") T0 = static_cast<long>(xv);
        if (sweep.y.param == "T") T = static_cast<long>(yv);
        if (sweep.y.param == "T0") T0 = static_cast<long>(yv);
        if (T0 > T) {
          grid.masked(iy, ix) = true;
          continue;
        }
      }
      double sum = 0.0;
      bool flagged = false;
      for (int rep = 0; rep < reps; ++rep) {
        const std::uint64_t rep_seed =
            Rng::derive(base.seed, 0x9e11 + 1000003ull * idx + rep);
        const UpdateSchedule sched = cell_schedule(base, sweep.x, xv, sweep.y, yv, rep_seed);
        double de;
        try {
          PredictionResult res = run_prediction(exp, &sched);
          de = res.errors.delta_e;
          if (!std::isfinite(de) || de > ceiling) {
            de = ceiling;
            flagged = true;
          }
        } catch (const DivergenceError&) {
          de = ceiling;
          flagged = true;
        }
        sum += de;
      }
      grid.values(iy, ix) = sum / reps;
      grid.flagged(iy, ix) = flagged;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  json meta;
  meta["config_hash"] = cfg.hash_hex();
  meta["quantity"] = "delta_e";
  meta["divergence_ceiling"] = ceiling;
  meta["schedule_seeds"] = reps;
  grid.metadata_json = meta.dump();
  return grid;
}

SweepGrid run_stability_map(const ExperimentConfig& cfg, int workers) {
  if (cfg.system.is_pde)
    throw ConfigError("stability map is defined for the ODE systems");
  if (!cfg.sweep) throw ConfigError("stability map requires a sweep block");
  if (!cfg.schedule || cfg.schedule->mode != UpdateSchedule::Mode::Regular)
    throw ConfigError("stability map requires a regular schedule block");
  const SweepAxis *tx = nullptr, *t0y = nullptr;
  if (cfg.sweep->x.param == "T" && cfg.sweep->y.param == "T0") {
    tx = &cfg.sweep->x;
    t0y = &cfg.sweep->y;
  } else if (cfg.sweep->x.param == "T0" && cfg.sweep->y.param == "T") {
    tx = &cfg.sweep->y;
    t0y = &cfg.sweep->x;
  } else {
    throw ConfigError("stability map axes must are T and T0");
  }

  std::vector<int> channels;
  if (cfg.schedule->sites) {
    channels = *cfg.schedule->sites;
  } else {
    const int stride = cfg.system.site_count() / *cfg.schedule->M_c;
    for (int j = 0; j < *cfg.schedule->M_c; ++j) channels.push_back(j * stride);
  }

  const OdeSystem ode = cfg.system.make_ode_system();
  BenettinOptions opts;
  opts.renorm_interval = cfg.lyapunov.renorm_interval;
  SweepGrid grid = stability_map(ode, cfg.schedule->c, t0y->values, tx->values, channels,
                                 cfg.lyapunov.n_steps, cfg.system.ic_seed, workers, opts);
  json meta;
  meta["config_hash"] = cfg.hash_hex();
  meta["quantity"] = "transverse_lyapunov";
  meta["coupling_c"] = cfg.schedule->c;
  meta["coupled_channels"] = channels;
  grid.metadata_json = meta.dump();
  // orient like the sweep axes if the caller put T on y
  if (cfg.sweep->x.param == "T0") {
    SweepGrid flipped;
    flipped.init("T0", "T", t0y->values, tx->values);
    for (long iy = 0; iy < grid.ny(); ++iy)
      for (long ix = 0; ix < grid.nx(); ++ix) {
        flipped.values(ix, iy) = grid.values(iy, ix);
        flipped.masked(ix, iy) = grid.masked(iy, ix);
        flipped.flagged(ix, iy) = grid.flagged(iy, ix);
      }
    flipped.metadata_json = grid.metadata_json;
    return flipped;
  }
  return grid;
}

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace rcpred
