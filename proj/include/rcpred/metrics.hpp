#pragma once

#include <Eigen/Dense>
#include <string>

#include "rcpred/trajectory.hpp"

namespace rcpred {

// Per-step normalized prediction error:
//   e(t) = ||v(t) - u(t)||_2 / u_rms,  u_rms = sqrt(mean_t ||u(t)||_2^2).
struct ErrorSeries {
  Eigen::VectorXd e;
  double dt = 0.0;
  double lambda_max = 0.0;
  double u_rms = 0.0;
  double delta_e = 0.0;     // mean of e over the evaluation window
  long horizon_steps = -1;  // -1: never exceeded tolerance persistently
};

struct ErrorOptions {
  double tolerance = 0.05;
  long confirm_steps = 10;
  double window_lyapunov_times = 100.0;  // delta_e averaging window
};

ErrorSeries error_series(const TrajectoryBuffer& pred, const TrajectoryBuffer& truth,
                         double lambda_max, const ErrorOptions& opts = {});

// First time e stays above tol for `confirm` consecutive steps, in Lyapunov
// times (t * lambda_max). +infinity if never.
double horizon(const ErrorSeries& series, double tol, long confirm);

inline double steps_per_lyapunov_time(double lambda_max, double dt) {
  return 1.0 / (lambda_max * dt);
}

// (t, e) rows.
void write_error_csv(const ErrorSeries& series, const std::string& path);

// Per-site |pred - truth| matrix (rows = time, cols = sites); complex fields
// use the per-site complex modulus of the difference.
void write_error_field_csv(const TrajectoryBuffer& pred, const TrajectoryBuffer& truth,
                           const std::string& path);

}  // namespace rcpred
