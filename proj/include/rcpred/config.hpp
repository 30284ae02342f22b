#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcpred/dynsys.hpp"
#include "rcpred/reservoir.hpp"
#include "rcpred/updating.hpp"

namespace rcpred {

// One experiment = system + reservoir + training + prediction + evaluation,
// with optional update schedule and sweep/stability blocks. Parsed from a
// JSON file; unknown keys are rejected so typos fail loudly.
struct SystemConfig {
  std::string name;         // rossler | lorenz | hindmarsh_rose | foodweb | kse | cgle
  bool is_pde = false;
  double dt = 0.0;
  long discard = 0;
  std::uint64_t ic_seed = 1;
  int substeps = 5;         // ODE
  double L = 0.0;           // PDE
  int M = 0;                // PDE
  double alpha = 0.0;       // cGLE
  double beta = 0.0;        // cGLE

  OdeSystem make_ode_system() const;
  PdeSystem make_pde_system() const;
  int input_dim() const;          // KSE: M, cGLE: 2M, ODE: 3
  int site_count() const;         // cGLE: M, otherwise input_dim
  int channels_per_site() const;  // cGLE: 2, otherwise 1
};

struct TrainingConfig {
  long n_steps = 0;
  long washout = 1000;
  double input_noise = 0.0;  // optional teacher-input perturbation scale
  std::uint64_t noise_seed = 1;
};

struct PredictionConfig {
  long n_steps = 0;
  long warmup = 100;
};

struct EvaluationConfig {
  double tolerance = 0.05;
  long confirm_steps = 10;
  double lambda_max = 0.0;
  double window_lyapunov_times = 100.0;
};

struct SweepAxis {
  std::string param;  // T | T0 | p_t | p_s
  std::vector<double> values;
};

struct SweepConfig {
  SweepAxis x;
  SweepAxis y;
  int schedule_seeds = 4;  // random-mode averaging
};

struct LyapunovConfig {
  long n_steps = 400000;
  long renorm_interval = 10;
};

struct ExperimentConfig {
  SystemConfig system;
  ReservoirParams reservoir;
  TrainingConfig training;
  PredictionConfig prediction;
  EvaluationConfig evaluation;
  std::optional<UpdateSchedule> schedule;
  std::optional<SweepConfig> sweep;
  LyapunovConfig lyapunov;

  // Canonical serialization (sorted keys, round-trip number formatting) and
  // the 64-bit FNV-1a hash of it, as a 16-digit hex run identifier.
  std::string canonical_json() const;
  std::string hash_hex() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void write_resolved_config(const ExperimentConfig& cfg, const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace rcpred
