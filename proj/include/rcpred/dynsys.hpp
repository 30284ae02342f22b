#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcpred/trajectory.hpp"

namespace rcpred {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class OdeName { Rossler, Lorenz, HindmarshRose, FoodWeb };
enum class PdeName { KSE, CGLE };

std::string to_string(OdeName name);
std::string to_string(PdeName name);
OdeName ode_from_string(const std::string& s);
PdeName pde_from_string(const std::string& s);

// Three-variable autonomous flow sampled at dt. Integration is fixed-step
// classical RK4 with `substeps` internal steps per output sample.
struct OdeSystem {
  OdeName name;
  int dimension = 3;
  double dt = 0.0;
  int substeps = 5;
  std::function<void(const Vec3&, Vec3&)> rhs;
  std::function<void(const Vec3&, Mat3&)> jacobian;
  Vec3 base_point;             // documented on-attractor starting region
  double ic_scale = 0.0;       // relative perturbation applied to base_point
  std::vector<std::string> channel_names;
};

OdeSystem make_ode(OdeName name);
OdeSystem make_ode(OdeName name, double dt);

// Seeded initial condition: base point with a small relative perturbation.
Vec3 default_initial_condition(const OdeSystem& sys, std::uint64_t seed);

// One RK4 output step (substeps internal steps of size dt/substeps).
void ode_step(const OdeSystem& sys, Vec3& x);

TrajectoryBuffer integrate_ode(const OdeSystem& sys, const Vec3& x0,
                               long n_steps, long discard);

// Periodic pseudospectral PDE on M uniform grid points over length L.
struct PdeSystem {
  PdeName name;
  double L = 0.0;
  int M = 0;
  double dt = 0.0;
  double alpha = 0.0;  // cGLE only
  double beta = 0.0;   // cGLE only

  void validate() const;  // M must be a power of two
};

PdeSystem make_kse(double L = 22.0, int M = 64, double dt = 0.25);
PdeSystem make_cgle(double L = 18.0, int M = 32, double dt = 0.07,
                    double alpha = 2.0, double beta = -2.0);

// ETDRK4 stepper for the KSE, state kept in the real-field half spectrum so
// conjugate symmetry is structural. Coefficients via the standard contour
// evaluation of the phi functions.
class KseStepper {
 public:
  explicit KseStepper(const PdeSystem& sys, bool linear_only = false);
  ~KseStepper();
  KseStepper(const KseStepper&) = delete;
  KseStepper& operator=(const KseStepper&) = delete;

  void set_field(const Eigen::VectorXd& y);
  Eigen::VectorXd field() const;
  void step();
  int grid_points() const { return M_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int M_;
};

// ETDRK4 stepper for the cGLE (complex field, full spectrum).
class CgleStepper {
 public:
  explicit CgleStepper(const PdeSystem& sys);
  ~CgleStepper();
  CgleStepper(const CgleStepper&) = delete;
  CgleStepper& operator=(const CgleStepper&) = delete;

  void set_field(const Eigen::VectorXcd& a);
  Eigen::VectorXcd field() const;
  void step();
  int grid_points() const { return M_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int M_;
};

Eigen::VectorXd default_initial_condition_kse(const PdeSystem& sys, std::uint64_t seed);
Eigen::VectorXcd default_initial_condition_cgle(const PdeSystem& sys, std::uint64_t seed);

TrajectoryBuffer integrate_kse(const PdeSystem& sys, const Eigen::VectorXd& y0,
                               long n_steps, long discard);
// Output interleaves real/imaginary parts per site (channels_per_site = 2).
TrajectoryBuffer integrate_cgle(const PdeSystem& sys, const Eigen::VectorXcd& a0,
                                long n_steps, long discard);

}  // namespace rcpred
