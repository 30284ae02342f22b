#include "rcpred/lyapunov.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "rcpred/errors.hpp"
#include "rcpred/rng.hpp"

namespace rcpred {

namespace {

// Joint RK4 step of state + tangent vector. The coupling term, when active,
// subtracts eps * delta on the masked components; eps is held constant over
// one output step, matching the piecewise-constant on-off drive.
struct TangentFlow {
  const OdeSystem* sys;
  double eps = 0.0;
  Eigen::Array<bool, 3, 1> mask = Eigen::Array<bool, 3, 1>::Zero();

  void operator()(const Eigen::Matrix<double, 6, 1>& y,
                  Eigen::Matrix<double, 6, 1>& out, double eps_now) const {
    const Vec3 x = y.template head<3>();
    const Vec3 d = y.template tail<3>();
    Vec3 dx;
    Mat3 J;
    sys->rhs(x, dx);
    sys->jacobian(x, J);
    Vec3 dd = J * d;
    if (eps_now != 0.0)
      for (int i = 0; i < 3; ++i)
        if (mask[i]) dd[i] -= eps_now * d[i];
    out.template head<3>() = dx;
    out.template tail<3>() = dd;
  }
};

void tangent_rk4(const TangentFlow& flow, Eigen::Matrix<double, 6, 1>& y, double h,
                 double eps_now) {
  Eigen::Matrix<double, 6, 1> k1, k2, k3, k4, t;
  flow(y, k1, eps_now);
  t = y + 0.5 * h * k1;
  flow(t, k2, eps_now);
  t = y + 0.5 * h * k2;
  flow(t, k3, eps_now);
  t = y + h * k3;
  flow(t, k4, eps_now);
  y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

LyapunovResult finish(double sum1, double sum2, long steps1, long steps2, double dt) {
  LyapunovResult res;
  res.first_half = sum1 / (steps1 * dt);
  res.second_half = sum2 / (steps2 * dt);
  res.exponent = (sum1 + sum2) / ((steps1 + steps2) * dt);
  const double scale = std::max({std::abs(res.first_half), std::abs(res.second_half), 1e-3});
  res.converged = std::abs(res.first_half - res.second_half) <= 0.2 * scale;
  return res;
}

LyapunovResult benettin_tangent(const OdeSystem& sys, const Vec3& x0, long n_steps,
                                const BenettinOptions& opts, double eps, long T, long T0,
                                const Eigen::Array<bool, 3, 1>& mask) {
  TangentFlow flow{&sys, eps, mask};
  Eigen::Matrix<double, 6, 1> y;
  y.head<3>() = x0;

  // settle onto the attractor before accumulating
  {
    Vec3 x = x0;
    for (long t = 0; t < 5000; ++t) ode_step(sys, x);
    y.head<3>() = x;
  }
  y.tail<3>() = Vec3(1.0, 1.0, 1.0).normalized();

  const double h = sys.dt / sys.substeps;
  const long events = n_steps / opts.renorm_interval;
  double sum1 = 0, sum2 = 0;
  long steps1 = 0, steps2 = 0;
  long accounted = 0;
  const long total_account = (events > opts.warmup_renorms)
                                 ? (events - opts.warmup_renorms) * opts.renorm_interval
                                 : 0;
  long step_index = 0;
  for (long e = 0; e < events; ++e) {
    for (long k = 0; k < opts.renorm_interval; ++k, ++step_index) {
      const double eps_now = (eps != 0.0 && (step_index % T) < T0) ? eps : 0.0;
      for (int s = 0; s < sys.substeps; ++s) tangent_rk4(flow, y, h, eps_now);
    }
    if (!y.allFinite()) throw DivergenceError("tangent flow diverged", step_index);
    const double nd = y.tail<3>().norm();
    if (e >= opts.warmup_renorms) {
      const double lg = std::log(nd);
      if (accounted < total_account / 2) {
        sum1 += lg;
        steps1 += opts.renorm_interval;
      } else {
        sum2 += lg;
        steps2 += opts.renorm_interval;
      }
      accounted += opts.renorm_interval;
    }
    y.tail<3>() /= nd;
  }
  if (steps1 == 0 || steps2 == 0) throw ConfigError("benettin: run too short");
  return finish(sum1, sum2, steps1, steps2, sys.dt);
}

template <class Stepper, class Field>
LyapunovResult benettin_clone(Stepper& main, Stepper& clone,
                              Field (Stepper::*get)() const,
                              void (Stepper::*set)(const Field&), double dt,
                              long n_steps, const BenettinOptions& opts) {
  Field base = (main.*get)();
  Field pert = base;
  pert[0] += opts.delta0;
  (clone.*set)(pert);

  const long events = n_steps / opts.renorm_interval;
  double sum1 = 0, sum2 = 0;
  long steps1 = 0, steps2 = 0;
  long accounted = 0;
  const long total_account = (events > opts.warmup_renorms)
                                 ? (events - opts.warmup_renorms) * opts.renorm_interval
                                 : 0;
  for (long e = 0; e < events; ++e) {
    for (long k = 0; k < opts.renorm_interval; ++k) {
      main.step();
      clone.step();
    }
    base = (main.*get)();
    pert = (clone.*get)();
    const double d = (pert - base).norm();
    if (!(d > 0.0) || !std::isfinite(d))
      throw DivergenceError("clone separation degenerate", e * opts.renorm_interval);
    if (e >= opts.warmup_renorms) {
      const double lg = std::log(d / opts.delta0);
      if (accounted < total_account / 2) {
        sum1 += lg;
        steps1 += opts.renorm_interval;
      } else {
        sum2 += lg;
        steps2 += opts.renorm_interval;
      }
      accounted += opts.renorm_interval;
    }
    pert = base + (pert - base) * (opts.delta0 / d);
    (clone.*set)(pert);
  }
  if (steps1 == 0 || steps2 == 0) throw ConfigError("benettin: run too short");
  return finish(sum1, sum2, steps1, steps2, dt);
}

}  // namespace

LyapunovResult max_lyapunov_ode(const OdeSystem& sys, const Vec3& x0, long n_steps,
                                const BenettinOptions& opts) {
  return benettin_tangent(sys, x0, n_steps, opts, 0.0, 1, 0,
                          Eigen::Array<bool, 3, 1>::Zero());
}

LyapunovResult max_lyapunov_kse(const PdeSystem& sys, const Eigen::VectorXd& y0,
                                long n_steps, const BenettinOptions& opts) {
  KseStepper main(sys), clone(sys);
  main.set_field(y0);
  for (long t = 0; t < 2000; ++t) main.step();  // transient
  return benettin_clone(main, clone, &KseStepper::field, &KseStepper::set_field,
                        sys.dt, n_steps, opts);
}

LyapunovResult max_lyapunov_cgle(const PdeSystem& sys, const Eigen::VectorXcd& a0,
                                 long n_steps, const BenettinOptions& opts) {
  CgleStepper main(sys), clone(sys);
  main.set_field(a0);
  for (long t = 0; t < 2000; ++t) main.step();
  return benettin_clone(main, clone, &CgleStepper::field, &CgleStepper::set_field,
                        sys.dt, n_steps, opts);
}

OnOffCoupling OnOffCoupling::from_discrete(double c, double dt, long T, long T0,
                                           const std::vector<int>& channels) {
  OnOffCoupling cp;
  cp.epsilon = c / dt;  // c = epsilon * dt
  cp.dt = dt;
  cp.T = T;
  cp.T0 = T0;
  for (int ch : channels) {
    if (ch < 0 || ch > 2) throw ConfigError("coupling channel out of range");
    cp.coupled_channels[ch] = true;
  }
  return cp;
}

LyapunovResult transverse_lyapunov(const OdeSystem& sys, const OnOffCoupling& coupling,
                                   const Vec3& x0, long n_steps,
                                   const BenettinOptions& opts) {
  if (!sys.jacobian) throw ConfigError("transverse_lyapunov: system lacks a Jacobian");
  if (coupling.T < 1 || coupling.T0 < 0 || coupling.T0 > coupling.T)
    throw ConfigError("transverse_lyapunov: need 0 <= T0 <= T, T >= 1");
  return benettin_tangent(sys, x0, n_steps, opts, coupling.epsilon, coupling.T,
                          coupling.T0, coupling.coupled_channels);
}

SweepGrid stability_map(const OdeSystem& sys, double c,
                        const std::vector<double>& T0_values,
                        const std::vector<double>& T_values,
                        const std::vector<int>& coupled_channels, long n_steps,
                        std::uint64_t ic_seed, int workers, const BenettinOptions& opts) {
  SweepGrid grid;
  grid.init("T", "T0", T_values, T0_values);
  const Vec3 x0 = default_initial_condition(sys, ic_seed);

  const long cells = grid.nx() * grid.ny();
  std::atomic<long> next{0};
  auto work = [&]() {
    while (true) {
      const long idx = next.fetch_add(1);
      if (idx >= cells) break;
      const long iy = idx / grid.nx();
      const long ix = idx % grid.nx();
      const long T = static_cast<long>(T_values[ix]);
      const long T0 = static_cast<long>(T0_values[iy]);
      if (T0 > T) {
        grid.values(iy, ix) = std::numeric_limits<double>::quiet_NaN();
        grid.masked(iy, ix) = true;
        continue;
      }
      const auto coupling = OnOffCoupling::from_discrete(c, sys.dt, T, T0, coupled_channels);
      const auto res = transverse_lyapunov(sys, coupling, x0, n_steps, opts);
      grid.values(iy, ix) = res.exponent;
      grid.flagged(iy, ix) = !res.converged;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return grid;
}

}  // namespace rcpred
