#include "rcpred/dynsys.hpp"

#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "rcpred/errors.hpp"
#include "rcpred/rng.hpp"

namespace rcpred {

namespace {

constexpr double kBlowupLimit = 1e6;

// FFTW plan creation/destruction is not thread-safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

void check_finite(const Vec3& x, long step, const char* what) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowupLimit)
    throw DivergenceError(std::string(what) + " integration blow-up", step);
}

template <class F>
void rk4_step(F&& f, Vec3& x, double h) {
  Vec3 k1, k2, k3, k4, t;
  f(x, k1);
  t = x + 0.5 * h * k1;
  f(t, k2);
  t = x + 0.5 * h * k2;
  f(t, k3);
  t = x + h * k3;
  f(t, k4);
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::string to_string(OdeName name) {
  switch (name) {
    case OdeName::Rossler: return "rossler";
    case OdeName::Lorenz: return "lorenz";
    case OdeName::HindmarshRose: return "hindmarsh_rose";
    case OdeName::FoodWeb: return "foodweb";
  }
  return "?";
}

std::string to_string(PdeName name) {
  return name == PdeName::KSE ? "kse" : "cgle";
}

OdeName ode_from_string(const std::string& s) {
  if (s == "rossler") return OdeName::Rossler;
  if (s == "lorenz") return OdeName::Lorenz;
  if (s == "hindmarsh_rose") return OdeName::HindmarshRose;
  if (s == "foodweb") return OdeName::FoodWeb;
  throw ConfigError("unknown ODE system: " + s);
}

PdeName pde_from_string(const std::string& s) {
  if (s == "kse") return PdeName::KSE;
  if (s == "cgle") return PdeName::CGLE;
  throw ConfigError("unknown PDE system: " + s);
}

OdeSystem make_ode(OdeName name) {
  OdeSystem sys;
  sys.name = name;
  sys.channel_names = {"x", "y", "z"};
  switch (name) {
    case OdeName::Rossler:
      sys.dt = 0.05;
      sys.rhs = [](const Vec3& x, Vec3& d) {
        d[0] = -x[1] - x[2];
        d[1] = x[0] + 0.2 * x[1];
        d[2] = 0.2 + (x[0] - 9.0) * x[2];
      };
      sys.jacobian = [](const Vec3& x, Mat3& J) {
        J << 0, -1, -1,
             1, 0.2, 0,
             x[2], 0, x[0] - 9.0;
      };
      sys.base_point = Vec3(1.0, 1.0, 1.0);
      sys.ic_scale = 0.1;
      break;
    case OdeName::Lorenz:
      sys.dt = 0.01;
      sys.rhs = [](const Vec3& x, Vec3& d) {
        d[0] = 10.0 * (x[1] - x[0]);
        d[1] = x[0] * (28.0 - x[2]) - x[1];
        d[2] = x[0] * x[1] - (8.0 / 3.0) * x[2];
      };
      sys.jacobian = [](const Vec3& x, Mat3& J) {
        J << -10.0, 10.0, 0,
             28.0 - x[2], -1.0, -x[0],
             x[1], x[0], -8.0 / 3.0;
      };
      sys.base_point = Vec3(1.0, 1.0, 1.0);
      sys.ic_scale = 0.1;
      break;
    case OdeName::HindmarshRose:
      sys.dt = 0.1;
      sys.rhs = [](const Vec3& x, Vec3& d) {
        d[0] = x[1] + 3.0 * x[0] * x[0] - x[0] * x[0] * x[0] - x[2] + 3.2;
        d[1] = 1.0 - 5.0 * x[0] * x[0] - x[1];
        d[2] = -0.006 * x[2] + 0.024 * (x[0] + 1.6);
      };
      sys.jacobian = [](const Vec3& x, Mat3& J) {
        J << 6.0 * x[0] - 3.0 * x[0] * x[0], 1.0, -1.0,
             -10.0 * x[0], -1.0, 0,
             0.024, 0, -0.006;
      };
      sys.base_point = Vec3(-1.0, -4.0, 3.0);
      sys.ic_scale = 0.05;
      break;
    case OdeName::FoodWeb:
      sys.dt = 0.1;
      sys.substeps = 20;  // predator bursts are stiff
      sys.rhs = [](const Vec3& x, Vec3& d) {
        const double g = 0.2 * x[0] / (1.0 + 0.05 * x[0]);
        d[0] = x[0] - g * x[1];
        d[1] = -x[1] + g * x[1] - x[1] * x[2];
        d[2] = -10.0 * (x[2] - 0.006) + x[1] * x[2];
      };
      sys.jacobian = [](const Vec3& x, Mat3& J) {
        const double den = 1.0 + 0.05 * x[0];
        const double g = 0.2 * x[0] / den;
        const double gp = 0.2 / (den * den);
        J << 1.0 - gp * x[1], -g, 0,
             gp * x[1], -1.0 + g - x[2], -x[1],
             0, x[2], -10.0 + x[1];
      };
      // Generic small positive states escape through unbounded vegetation
      // growth; this point sits in the basin of the bounded chaotic set.
      sys.base_point = Vec3(10.0, 5.0, 0.006);
      sys.ic_scale = 0.01;
      sys.channel_names = {"vegetation", "herbivores", "predators"};
      break;
  }
  return sys;
}

OdeSystem make_ode(OdeName name, double dt) {
  OdeSystem sys = make_ode(name);
  sys.dt = dt;
  return sys;
}

Vec3 default_initial_condition(const OdeSystem& sys, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x1c0));
  Vec3 x = sys.base_point;
  for (int i = 0; i < 3; ++i) x[i] *= 1.0 + sys.ic_scale * rng.uniform(-1.0, 1.0);
  return x;
}

void ode_step(const OdeSystem& sys, Vec3& x) {
  const double h = sys.dt / sys.substeps;
  for (int s = 0; s < sys.substeps; ++s) rk4_step(sys.rhs, x, h);
}

TrajectoryBuffer integrate_ode(const OdeSystem& sys, const Vec3& x0,
                               long n_steps, long discard) {
  if (n_steps <= 0) throw ConfigError("integrate_ode: n_steps must be positive");
  if (!x0.allFinite()) throw ConfigError("integrate_ode: non-finite initial state");
  Vec3 x = x0;
  for (long t = 0; t < discard; ++t) {
    ode_step(sys, x);
    check_finite(x, t - discard, to_string(sys.name).c_str());
  }
  TrajectoryBuffer traj;
  traj.dt = sys.dt;
  traj.channels = sys.channel_names;
  traj.data.resize(n_steps, 3);
  for (long t = 0; t < n_steps; ++t) {
    traj.data.row(t) = x;
    ode_step(sys, x);
    check_finite(x, t, to_string(sys.name).c_str());
  }
  return traj;
}

void PdeSystem::validate() const {
  if (M <= 0 || (M & (M - 1)) != 0)
    throw ConfigError("PDE grid size M must be a power of two, got " + std::to_string(M));
  if (L <= 0 || dt <= 0) throw ConfigError("PDE needs positive L and dt");
}

PdeSystem make_kse(double L, int M, double dt) {
  PdeSystem sys;
  sys.name = PdeName::KSE;
  sys.L = L;
  sys.M = M;
  sys.dt = dt;
  sys.validate();
  return sys;
}

PdeSystem make_cgle(double L, int M, double dt, double alpha, double beta) {
  PdeSystem sys;
  sys.name = PdeName::CGLE;
  sys.L = L;
  sys.M = M;
  sys.dt = dt;
  sys.alpha = alpha;
  sys.beta = beta;
  sys.validate();
  return sys;
}

// ---------------------------------------------------------------------------
// ETDRK4 coefficients: phi-function combinations evaluated as means over a
// unit circle around h*L_k, which is stable for L_k of any magnitude.

namespace {

struct Etdrk4Coeffs {
  std::complex<double> E, E2, Q, f1, f2, f3;
};

Etdrk4Coeffs etdrk4_for_symbol(std::complex<double> Lk, double h) {
  using cplx = std::complex<double>;
  constexpr int P = 64;
  Etdrk4Coeffs c;
  c.E = std::exp(h * Lk);
  c.E2 = std::exp(h * Lk / 2.0);
  cplx q = 0, a = 0, b = 0, d = 0;
  for (int j = 0; j < P; ++j) {
    const cplx z = h * Lk + std::exp(cplx(0.0, 2.0 * M_PI * (j + 0.5) / P));
    const cplx ez = std::exp(z);
    q += (std::exp(z / 2.0) - 1.0) / z;
    a += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
    b += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
    d += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
  }
  c.Q = h * q / double(P);
  c.f1 = h * a / double(P);
  c.f2 = h * b / double(P);
  c.f3 = h * d / double(P);
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// KSE: y_t = -y y_x - y_xx - y_xxxx, spectral symbol k^2 - k^4, nonlinear
// term -(ik/2) F[y^2] with 2/3-rule dealiasing. Half-spectrum state.

struct KseStepper::Impl {
  int M, K;
  double dt;
  bool linear_only;
  std::vector<double> E, E2, Q, f1, f2, f3;
  std::vector<std::complex<double>> g;
  std::vector<int> keep;
  std::vector<double> phys;
  std::vector<std::complex<double>> spec, v, Nv, sa, Na, sb, Nb, sc, Nc;
  fftw_plan fwd = nullptr, bwd = nullptr;

  Impl(const PdeSystem& sys, bool lin)
      : M(sys.M), K(sys.M / 2 + 1), dt(sys.dt), linear_only(lin),
        E(K), E2(K), Q(K), f1(K), f2(K), f3(K), g(K), keep(K),
        phys(M), spec(K), v(K), Nv(K), sa(K), Na(K), sb(K), Nb(K), sc(K), Nc(K) {
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fwd = fftw_plan_dft_r2c_1d(M, phys.data(),
                                 reinterpret_cast<fftw_complex*>(spec.data()), FFTW_ESTIMATE);
      bwd = fftw_plan_dft_c2r_1d(M, reinterpret_cast<fftw_complex*>(spec.data()),
                                 phys.data(), FFTW_ESTIMATE);
    }
    for (int i = 0; i < K; ++i) {
      const double k = 2.0 * M_PI * i / sys.L;
      const auto c = etdrk4_for_symbol(k * k - k * k * k * k, dt);
      E[i] = c.E.real();
      E2[i] = c.E2.real();
      Q[i] = c.Q.real();
      f1[i] = c.f1.real();
      f2[i] = c.f2.real();
      f3[i] = c.f3.real();
      g[i] = std::complex<double>(0.0, -0.5 * k);
      if (i == M / 2) g[i] = 0.0;  // Nyquist derivative
      keep[i] = (i > M / 3) ? 0 : 1;
    }
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }

  void nonlin(const std::vector<std::complex<double>>& in,
              std::vector<std::complex<double>>& out) {
    if (linear_only) {
      std::fill(out.begin(), out.end(), std::complex<double>(0.0));
      return;
    }
    spec = in;
    fftw_execute(bwd);
    for (int i = 0; i < M; ++i) {
      const double y = phys[i] / M;
      phys[i] = y * y;
    }
    fftw_execute(fwd);
    for (int i = 0; i < K; ++i) out[i] = keep[i] ? g[i] * spec[i] : std::complex<double>(0.0);
  }

  void step() {
    nonlin(v, Nv);
    for (int i = 0; i < K; ++i) sa[i] = E2[i] * v[i] + Q[i] * Nv[i];
    nonlin(sa, Na);
    for (int i = 0; i < K; ++i) sb[i] = E2[i] * v[i] + Q[i] * Na[i];
    nonlin(sb, Nb);
    for (int i = 0; i < K; ++i) sc[i] = E2[i] * sa[i] + Q[i] * (2.0 * Nb[i] - Nv[i]);
    nonlin(sc, Nc);
    for (int i = 0; i < K; ++i)
      v[i] = E[i] * v[i] + Nv[i] * f1[i] + 2.0 * (Na[i] + Nb[i]) * f2[i] + Nc[i] * f3[i];
  }
};

KseStepper::KseStepper(const PdeSystem& sys, bool linear_only) : M_(sys.M) {
  sys.validate();
  if (sys.name != PdeName::KSE) throw ConfigError("KseStepper needs a KSE system");
  impl_ = std::make_unique<Impl>(sys, linear_only);
}

KseStepper::~KseStepper() = default;

void KseStepper::set_field(const Eigen::VectorXd& y) {
  if (y.size() != M_) throw ConfigError("KSE field size mismatch");
  for (int i = 0; i < M_; ++i) impl_->phys[i] = y[i];
  fftw_execute(impl_->fwd);
  impl_->v = impl_->spec;
}

Eigen::VectorXd KseStepper::field() const {
  impl_->spec = impl_->v;
  fftw_execute(impl_->bwd);
  Eigen::VectorXd y(M_);
  for (int i = 0; i < M_; ++i) y[i] = impl_->phys[i] / M_;
  return y;
}

void KseStepper::step() { impl_->step(); }

// ---------------------------------------------------------------------------
// cGLE: A_t = A + (1+i alpha) A_xx - (1+i beta) |A|^2 A; complex field, full
// spectrum, same ETDRK4 scheme with complex coefficients.

struct CgleStepper::Impl {
  int M;
  double dt;
  std::vector<std::complex<double>> E, E2, Q, f1, f2, f3;
  std::vector<int> keep;
  double beta;
  std::vector<std::complex<double>> phys, spec, v, Nv, sa, Na, sb, Nb, sc, Nc;
  fftw_plan fwd = nullptr, bwd = nullptr;

  Impl(const PdeSystem& sys)
      : M(sys.M), dt(sys.dt), E(M), E2(M), Q(M), f1(M), f2(M), f3(M), keep(M),
        beta(sys.beta), phys(M), spec(M), v(M), Nv(M), sa(M), Na(M), sb(M), Nb(M),
        sc(M), Nc(M) {
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fwd = fftw_plan_dft_1d(M, reinterpret_cast<fftw_complex*>(phys.data()),
                             reinterpret_cast<fftw_complex*>(spec.data()),
                             FFTW_FORWARD, FFTW_ESTIMATE);
      bwd = fftw_plan_dft_1d(M, reinterpret_cast<fftw_complex*>(spec.data()),
                             reinterpret_cast<fftw_complex*>(phys.data()),
                             FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    for (int i = 0; i < M; ++i) {
      const int n = (i < M / 2) ? i : i - M;
      const double k = 2.0 * M_PI * n / sys.L;
      const std::complex<double> Lk =
          std::complex<double>(1.0, 0.0) - std::complex<double>(1.0, sys.alpha) * k * k;
      const auto c = etdrk4_for_symbol(Lk, dt);
      E[i] = c.E;
      E2[i] = c.E2;
      Q[i] = c.Q;
      f1[i] = c.f1;
      f2[i] = c.f2;
      f3[i] = c.f3;
      keep[i] = (std::abs(n) > M / 3) ? 0 : 1;
    }
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }

  void nonlin(const std::vector<std::complex<double>>& in,
              std::vector<std::complex<double>>& out) {
    spec = in;
    fftw_execute(bwd);
    const std::complex<double> coef(1.0, beta);
    for (int i = 0; i < M; ++i) {
      const std::complex<double> a = phys[i] / double(M);
      phys[i] = -coef * std::norm(a) * a;
    }
    fftw_execute(fwd);
    for (int i = 0; i < M; ++i) out[i] = keep[i] ? spec[i] : std::complex<double>(0.0);
  }

  void step() {
    nonlin(v, Nv);
    for (int i = 0; i < M; ++i) sa[i] = E2[i] * v[i] + Q[i] * Nv[i];
    nonlin(sa, Na);
    for (int i = 0; i < M; ++i) sb[i] = E2[i] * v[i] + Q[i] * Na[i];
    nonlin(sb, Nb);
    for (int i = 0; i < M; ++i) sc[i] = E2[i] * sa[i] + Q[i] * (2.0 * Nb[i] - Nv[i]);
    nonlin(sc, Nc);
    for (int i = 0; i < M; ++i)
      v[i] = E[i] * v[i] + Nv[i] * f1[i] + 2.0 * (Na[i] + Nb[i]) * f2[i] + Nc[i] * f3[i];
  }
};

CgleStepper::CgleStepper(const PdeSystem& sys) : M_(sys.M) {
  sys.validate();
  if (sys.name != PdeName::CGLE) throw ConfigError("CgleStepper needs a cGLE system");
  impl_ = std::make_unique<Impl>(sys);
}

CgleStepper::~CgleStepper() = default;

void CgleStepper::set_field(const Eigen::VectorXcd& a) {
  if (a.size() != M_) throw ConfigError("cGLE field size mismatch");
  for (int i = 0; i < M_; ++i) impl_->phys[i] = a[i];
  fftw_execute(impl_->fwd);
  impl_->v = impl_->spec;
}

Eigen::VectorXcd CgleStepper::field() const {
  impl_->spec = impl_->v;
  fftw_execute(impl_->bwd);
  Eigen::VectorXcd a(M_);
  for (int i = 0; i < M_; ++i) a[i] = impl_->phys[i] / double(M_);
  return a;
}

void CgleStepper::step() { impl_->step(); }

// ---------------------------------------------------------------------------

Eigen::VectorXd default_initial_condition_kse(const PdeSystem& sys, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x2b5e));
  Eigen::VectorXd y(sys.M);
  for (int i = 0; i < sys.M; ++i) y[i] = rng.uniform(-0.5, 0.5);
  return y;
}

Eigen::VectorXcd default_initial_condition_cgle(const PdeSystem& sys, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x3c91));
  Eigen::VectorXcd a(sys.M);
  for (int i = 0; i < sys.M; ++i)
    a[i] = std::complex<double>(0.8 + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  return a;
}

namespace {

template <class Stepper, class GetRow>
void run_pde(Stepper& stepper, long n_steps, long discard, TrajectoryBuffer& traj,
             GetRow&& get_row, const char* what) {
  for (long t = 0; t < discard; ++t) stepper.step();
  for (long t = 0; t < n_steps; ++t) {
    get_row(traj.data.row(t));
    if (!traj.data.row(t).allFinite() ||
        traj.data.row(t).cwiseAbs().maxCoeff() > kBlowupLimit)
      throw DivergenceError(std::string(what) + " integration blow-up", t);
    stepper.step();
  }
}

}  // namespace

TrajectoryBuffer integrate_kse(const PdeSystem& sys, const Eigen::VectorXd& y0,
                               long n_steps, long discard) {
  if (n_steps <= 0) throw ConfigError("integrate_kse: n_steps must be positive");
  KseStepper stepper(sys);
  stepper.set_field(y0);
  TrajectoryBuffer traj;
  traj.dt = sys.dt;
  traj.data.resize(n_steps, sys.M);
  for (int i = 0; i < sys.M; ++i) traj.channels.push_back("y" + std::to_string(i));
  run_pde(stepper, n_steps, discard, traj,
          [&](auto row) { row = stepper.field().transpose(); }, "KSE");
  return traj;
}

TrajectoryBuffer integrate_cgle(const PdeSystem& sys, const Eigen::VectorXcd& a0,
                                long n_steps, long discard) {
  if (n_steps <= 0) throw ConfigError("integrate_cgle: n_steps must be positive");
  CgleStepper stepper(sys);
  stepper.set_field(a0);
  TrajectoryBuffer traj;
  traj.dt = sys.dt;
  traj.channels_per_site = 2;
  traj.data.resize(n_steps, 2 * sys.M);
  for (int i = 0; i < sys.M; ++i) {
    traj.channels.push_back("re" + std::to_string(i));
    traj.channels.push_back("im" + std::to_string(i));
  }
  run_pde(stepper, n_steps, discard, traj,
          [&](auto row) {
            const Eigen::VectorXcd a = stepper.field();
            for (int i = 0; i < sys.M; ++i) {
              row[2 * i] = a[i].real();
              row[2 * i + 1] = a[i].imag();
            }
          },
          "cGLE");
  return traj;
}

}  // namespace rcpred
