#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "rcpred/dynsys.hpp"
#include "rcpred/sweep.hpp"

namespace rcpred {

struct LyapunovResult {
  double exponent = 0.0;   // 1/time
  bool converged = true;   // halves agree within 20%
  double first_half = 0.0;
  double second_half = 0.0;
};

struct BenettinOptions {
  long renorm_interval = 10;   // steps between renormalizations
  long warmup_renorms = 50;    // renorm events excluded from the average
  double delta0 = 1e-7;        // clone separation (PDE finite difference)
};

// Tangent-vector method for ODEs: the variational system is integrated with
// the trajectory using the analytic Jacobian.
LyapunovResult max_lyapunov_ode(const OdeSystem& sys, const Vec3& x0, long n_steps,
                                const BenettinOptions& opts = {});

// Cloned-trajectory finite difference for the PDEs.
LyapunovResult max_lyapunov_kse(const PdeSystem& sys, const Eigen::VectorXd& y0,
                                long n_steps, const BenettinOptions& opts = {});
LyapunovResult max_lyapunov_cgle(const PdeSystem& sys, const Eigen::VectorXcd& a0,
                                 long n_steps, const BenettinOptions& opts = {});

// On-off coupling acting on the variational flow: epsilon(t) = epsilon while
// (step mod T) < T0, else 0, with epsilon = c / dt.
struct OnOffCoupling {
  double epsilon = 0.0;
  long T = 1;
  long T0 = 1;
  double dt = 0.0;
  Eigen::Array<bool, 3, 1> coupled_channels = Eigen::Array<bool, 3, 1>::Zero();

  static OnOffCoupling from_discrete(double c, double dt, long T, long T0,
                                     const std::vector<int>& channels);
};

// Maximum transverse Lyapunov exponent of the coupled variational system:
// delta' = J(x) delta - epsilon(t) * (masked delta). Negative means the
// on-off coupled replica synchronizes with the true system.
LyapunovResult transverse_lyapunov(const OdeSystem& sys, const OnOffCoupling& coupling,
                                   const Vec3& x0, long n_steps,
                                   const BenettinOptions& opts = {});

// Transverse exponent over a (T0, T) grid at fixed discrete coupling c.
// Cells with T0 > T are masked. Cells run in parallel across `workers`.
SweepGrid stability_map(const OdeSystem& sys, double c,
                        const std::vector<double>& T0_values,
                        const std::vector<double>& T_values,
                        const std::vector<int>& coupled_channels,
                        long n_steps, std::uint64_t ic_seed, int workers,
                        const BenettinOptions& opts = {});

}  // namespace rcpred
