#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rcpred/config.hpp"
#include "rcpred/metrics.hpp"
#include "rcpred/reservoir.hpp"
#include "rcpred/sweep.hpp"
#include "rcpred/trajectory.hpp"

namespace rcpred {

// Ground truth covering the training segment, the warmup tail and the
// prediction window, generated from the configured system and seed.
TrajectoryBuffer generate_truth(const SystemConfig& sys, long n_steps);

// Training + evaluation data layout within one long trajectory:
//   rows [0, n_train)                      teacher-forcing segment
//   rows [n_train - warmup, n_train)       prediction warmup
//   rows [n_train, n_train + n_pred)       prediction targets
struct Experiment {
  ExperimentConfig config;
  TrajectoryBuffer truth;  // n_train + n_pred rows
  ReservoirModel model;
  TrainReport report;

  Eigen::MatrixXd warmup_block() const;
  TrajectoryBuffer prediction_truth() const;  // aligned with prediction steps
};

// Generates data and trains the reservoir once. When cache_dir is set, the
// trajectory and model snapshot are stored/retrieved keyed by config hash.
Experiment prepare_experiment(const ExperimentConfig& cfg,
                              const std::string& cache_dir = "");

struct PredictionResult {
  TrajectoryBuffer prediction;
  ErrorSeries errors;
};

// Closed-loop run with the experiment's schedule (or an override).
PredictionResult run_prediction(const Experiment& exp,
                                const UpdateSchedule* schedule_override = nullptr,
                                long n_steps_override = 0);

// delta_e over the configured evaluation window for every (x, y) sweep cell.
// The model is trained once and shared; cells differ only in the schedule.
// Diverged cells are clamped to delta_e = 10 and flagged.
SweepGrid run_schedule_sweep(const Experiment& exp, const SweepConfig& sweep,
                             int workers);

// Transverse-exponent map over the same kind of grid (ODE systems).
SweepGrid run_stability_map(const ExperimentConfig& cfg, int workers);

int default_workers();

}  // namespace rcpred
