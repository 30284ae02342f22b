#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <string>

#include "rcpred/trajectory.hpp"
#include "rcpred/updating.hpp"

namespace rcpred {

enum class InputStructure {
  Dense,    // every W_in entry drawn uniform [-sigma, sigma]
  Grouped,  // one nonzero per row; rows partitioned evenly across inputs
};

struct ReservoirParams {
  int D_r = 0;
  int D_in = 0;
  int D_out = 0;
  double sigma = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  std::optional<double> degree;   // expected out-degree d (edge prob d/D_r)
  std::optional<double> density;  // link density d' (edge prob d')
  InputStructure input_structure = InputStructure::Grouped;
  std::uint64_t seed = 0;

  double edge_probability() const;
  void validate() const;
};

struct TrainReport {
  long n_train_steps = 0;
  long washout = 0;
  Eigen::VectorXd residual_rms;      // per output channel
  double condition_estimate = 0.0;   // lambda_max(G G^T + eta I) / eta
};

// Largest eigenvalue magnitude via norm-growth power iteration with a
// geometric-mean tail; handles complex dominant pairs.
double spectral_radius_estimate(const Eigen::SparseMatrix<double>& A,
                                std::uint64_t seed = 1,
                                long max_iters = 60000, double tol = 1e-12);

Eigen::VectorXd readout_features(const Eigen::VectorXd& r);

// Echo-state network: r(t+dt) = tanh(A r(t) + W_in v(t)),
// v(t+dt) = W_out f(r(t+dt)) with f squaring even-numbered components.
class ReservoirModel {
 public:
  static ReservoirModel build(const ReservoirParams& params);

  const ReservoirParams& params() const { return params_; }
  const Eigen::SparseMatrix<double>& adjacency() const { return A_; }
  const Eigen::MatrixXd& w_in() const { return W_in_; }
  const Eigen::MatrixXd& w_out() const { return W_out_; }
  bool trained() const { return W_out_.size() > 0; }
  int rebuild_attempts() const { return rebuild_attempts_; }

  const Eigen::VectorXd& state() const { return r_; }
  void set_state(const Eigen::VectorXd& r);
  void reset_state();

  // r <- tanh(A r + W_in v); returns the new state.
  const Eigen::VectorXd& drive(const Eigen::VectorXd& v);

  Eigen::VectorXd output() const;  // W_out f(r)

  // Teacher-forced ridge regression of W_out against the next-step targets.
  // Minimizes sum_t ||u(t) - W g(t)||^2 + eta ||W||_F^2 via the regularized
  // normal equations. Leaves r at the end-of-trajectory state. A small
  // input_noise perturbs the teacher inputs (not the targets), which
  // stabilizes the closed loop; residuals are reported against the clean
  // pass.
  TrainReport train(const TrajectoryBuffer& traj, long washout,
                    double input_noise = 0.0, std::uint64_t noise_seed = 0);

  // Closed-loop run: teacher-forces `warmup` rows from a zero state, then
  // feeds the readout back for n_steps. When a schedule is given, truth row t
  // must hold the true state aligned with prediction step t; active channels
  // of the fed-back input are moved toward it before the drive. Does not
  // mutate the model (local reservoir state).
  TrajectoryBuffer predict_closed_loop(const Eigen::MatrixXd& warmup, long n_steps,
                                       const UpdateSchedule* schedule = nullptr,
                                       const TrajectoryBuffer* truth = nullptr) const;

  // Snapshot: one-line JSON header plus binary sections (W_in dense, grouped
  // column map, A in coordinate form, W_out, r). Bit-exact round trip.
  void save(const std::string& path) const;
  static ReservoirModel load(const std::string& path);

 private:
  ReservoirModel() = default;
  void drive_into(Eigen::VectorXd& r, const Eigen::VectorXd& v, Eigen::VectorXd& scratch) const;

  ReservoirParams params_;
  Eigen::SparseMatrix<double> A_;
  Eigen::MatrixXd W_in_;
  Eigen::VectorXi w_in_col_;   // grouped: column of the single nonzero per row
  Eigen::VectorXd w_in_val_;
  Eigen::MatrixXd W_out_;
  Eigen::VectorXd r_;
  int rebuild_attempts_ = 0;
};

}  // namespace rcpred
