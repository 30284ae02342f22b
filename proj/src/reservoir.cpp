#include "rcpred/reservoir.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "rcpred/errors.hpp"
#include "rcpred/rng.hpp"

namespace rcpred {

double ReservoirParams::edge_probability() const {
  if (degree) return *degree / D_r;
  return *density;
}

void ReservoirParams::validate() const {
  if (D_r <= 0 || D_in <= 0 || D_out <= 0)
    throw ConfigError("reservoir: D_r, D_in, D_out must be positive");
  if (D_in > D_r) throw ConfigError("reservoir: D_in must not exceed D_r");
  if (sigma < 0.0) throw ConfigError("reservoir: sigma must be >= 0");
  if (rho <= 0.0) throw ConfigError("reservoir: rho must be > 0");
  if (eta <= 0.0) throw ConfigError("reservoir: eta must be > 0");
  if (degree.has_value() == density.has_value())
    throw ConfigError("reservoir: give exactly one of degree or density");
  const double p = edge_probability();
  if (p <= 0.0 || p > 1.0)
    throw ConfigError("reservoir: edge probability out of (0, 1]");
}

double spectral_radius_estimate(const Eigen::SparseMatrix<double>& A,
                                std::uint64_t seed, long max_iters, double tol) {
  const long n = A.rows();
  Rng rng(Rng::derive(seed, 0x43ad));
  Eigen::VectorXd x(n);
  for (long i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
  double nx = x.norm();
  if (nx == 0.0) x.setOnes(), nx = std::sqrt(double(n));
  x /= nx;

  // Norm growth with a running geometric mean; two consecutive window means
  // must agree. Handles complex dominant pairs, whose growth factor
  // oscillates but has the right geometric mean.
  const long window = 500;
  double sum = 0.0;
  double prev_mean = -1.0;
  long count = 0;
  Eigen::VectorXd y(n);
  for (long it = 0; it < max_iters; ++it) {
    y.noalias() = A * x;
    const double g = y.norm();
    if (g < 1e-300) return 0.0;  // (numerically) nilpotent
    x = y / g;
    sum += std::log(g);
    if (++count == window) {
      const double mean = sum / window;
      if (prev_mean >= 0.0 && std::abs(mean - prev_mean) < tol * std::max(1.0, std::abs(mean)))
        return std::exp(0.5 * (mean + prev_mean));
      prev_mean = mean;
      sum = 0.0;
      count = 0;
    }
  }
  return std::exp(prev_mean >= 0.0 ? prev_mean : sum / std::max(1L, count));
}

Eigen::VectorXd readout_features(const Eigen::VectorXd& r) {
  Eigen::VectorXd g = r;
  // components are squared at even 1-based positions (odd 0-based)
  for (long i = 1; i < g.size(); i += 2) g[i] = r[i] * r[i];
  return g;
}

namespace {

inline void features_into(const Eigen::VectorXd& r, Eigen::VectorXd& g) {
  g = r;
  for (long i = 1; i < g.size(); i += 2) g[i] = r[i] * r[i];
}

}  // namespace

ReservoirModel ReservoirModel::build(const ReservoirParams& params) {
  params.validate();
  ReservoirModel m;
  m.params_ = params;

  const int n = params.D_r;
  const double p = params.edge_probability();
  std::uint64_t seed = params.seed;
  int attempts = 0;
  while (true) {
    Rng rng(Rng::derive(seed, 0xad30));
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(p * n * double(n) * 1.1) + 16);
    if (p >= 1.0) {
      for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j)
          trips.emplace_back(int(i), int(j), rng.uniform(-1.0, 1.0));
    } else {
      // geometric gap sampling over the flattened index space
      const double lq = std::log1p(-p);
      const long total = static_cast<long>(n) * n;
      long idx = -1;
      while (true) {
        const double u = rng.uniform();
        idx += static_cast<long>(std::floor(std::log1p(-u) / lq)) + 1;
        if (idx >= total) break;
        trips.emplace_back(int(idx / n), int(idx % n), rng.uniform(-1.0, 1.0));
      }
    }
    m.A_.resize(n, n);
    m.A_.setFromTriplets(trips.begin(), trips.end());
    const double radius = spectral_radius_estimate(m.A_, seed);
    if (radius > 1e-12) {
      m.A_ *= params.rho / radius;
      break;
    }
    ++attempts;
    ++seed;
    if (attempts >= 8)
      throw ConfigError("reservoir build: adjacency spectral radius vanished for 8 seeds");
  }
  m.rebuild_attempts_ = attempts;

  Rng rng(Rng::derive(seed, 0x174a));
  m.W_in_ = Eigen::MatrixXd::Zero(n, params.D_in);
  if (params.input_structure == InputStructure::Grouped) {
    m.w_in_col_.resize(n);
    m.w_in_val_.resize(n);
    // rows partitioned into D_in contiguous blocks, one input channel each
    const int base = n / params.D_in;
    const int rem = n % params.D_in;
    int row = 0;
    for (int c = 0; c < params.D_in; ++c) {
      const int count = base + (c < rem ? 1 : 0);
      for (int k = 0; k < count; ++k, ++row) {
        m.w_in_col_[row] = c;
        m.w_in_val_[row] = rng.uniform(-params.sigma, params.sigma);
        m.W_in_(row, c) = m.w_in_val_[row];
      }
    }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < params.D_in; ++j)
        m.W_in_(i, j) = rng.uniform(-params.sigma, params.sigma);
  }

  m.r_ = Eigen::VectorXd::Zero(n);
  return m;
}

void ReservoirModel::set_state(const Eigen::VectorXd& r) {
  if (r.size() != params_.D_r) throw ConfigError("set_state: wrong length");
  r_ = r;
}

void ReservoirModel::reset_state() { r_.setZero(); }

void ReservoirModel::drive_into(Eigen::VectorXd& r, const Eigen::VectorXd& v,
                                Eigen::VectorXd& scratch) const {
  scratch.noalias() = A_ * r;
  if (params_.input_structure == InputStructure::Grouped) {
    for (int i = 0; i < params_.D_r; ++i) scratch[i] += w_in_val_[i] * v[w_in_col_[i]];
  } else {
    scratch.noalias() += W_in_ * v;
  }
  r = scratch.array().tanh();
}

const Eigen::VectorXd& ReservoirModel::drive(const Eigen::VectorXd& v) {
  if (v.size() != params_.D_in) throw ConfigError("drive: input length mismatch");
  Eigen::VectorXd scratch(params_.D_r);
  drive_into(r_, v, scratch);
  return r_;
}

Eigen::VectorXd ReservoirModel::output() const {
  if (!trained()) throw ConfigError("output: model is not trained");
  return W_out_ * readout_features(r_);
}

TrainReport ReservoirModel::train(const TrajectoryBuffer& traj, long washout,
                                  double input_noise, std::uint64_t noise_seed) {
  const long N = traj.steps();
  if (traj.dim() != params_.D_in)
    throw ConfigError("train: trajectory dimension does not match D_in");
  if (N <= washout + 1)
    throw ConfigError("train: trajectory shorter than washout + 1");

  const int Dr = params_.D_r;
  const int Dout = params_.D_out;
  Eigen::MatrixXd GGT = Eigen::MatrixXd::Zero(Dr, Dr);
  Eigen::MatrixXd GU = Eigen::MatrixXd::Zero(Dr, Dout);

  const int block = 1024;
  Eigen::MatrixXd Gb(Dr, block);
  Eigen::MatrixXd Ub(block, Dout);
  int nb = 0;

  Eigen::VectorXd r = Eigen::VectorXd::Zero(Dr), scratch(Dr), g(Dr);
  Rng noise_rng(Rng::derive(noise_seed, 0x2017));
  Eigen::VectorXd vin(params_.D_in);
  for (long t = 0; t + 1 < N; ++t) {
    vin = traj.data.row(t).transpose();
    if (input_noise > 0.0)
      for (int j = 0; j < params_.D_in; ++j) vin[j] += input_noise * noise_rng.uniform(-1.0, 1.0);
    drive_into(r, vin, scratch);
    if (t + 1 > washout) {
      features_into(r, g);
      Gb.col(nb) = g;
      Ub.row(nb) = traj.data.row(t + 1);
      if (++nb == block) {
        GGT.selfadjointView<Eigen::Lower>().rankUpdate(Gb, 1.0);
        GU.noalias() += Gb * Ub;
        nb = 0;
      }
    }
  }
  if (nb > 0) {
    GGT.selfadjointView<Eigen::Lower>().rankUpdate(Gb.leftCols(nb), 1.0);
    GU.noalias() += Gb.leftCols(nb) * Ub.topRows(nb);
  }

  // crude largest-eigenvalue estimate for the condition report
  double lam_max = 0.0;
  {
    Eigen::VectorXd x = Eigen::VectorXd::Ones(Dr).normalized();
    for (int it = 0; it < 30; ++it) {
      Eigen::VectorXd y = GGT.selfadjointView<Eigen::Lower>() * x;
      lam_max = y.norm();
      if (lam_max == 0.0) break;
      x = y / lam_max;
    }
  }

  GGT.diagonal().array() += params_.eta;
  Eigen::MatrixXd WoutT;
  Eigen::LLT<Eigen::MatrixXd> llt(GGT.selfadjointView<Eigen::Lower>());
  if (llt.info() == Eigen::Success) {
    WoutT = llt.solve(GU);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(GGT.selfadjointView<Eigen::Lower>());
    WoutT = ldlt.solve(GU);
  }
  if (!WoutT.allFinite())
    throw DivergenceError("ridge solve produced non-finite readout (cond~" +
                              std::to_string((lam_max + params_.eta) / params_.eta) + ")",
                          0);
  W_out_ = WoutT.transpose();

  // second teacher-forced pass for exact residuals; leaves r_ at the state
  // after consuming the last row, ready for continuation
  r.setZero();
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(Dout);
  long samples = 0;
  for (long t = 0; t + 1 < N; ++t) {
    drive_into(r, traj.data.row(t).transpose(), scratch);
    if (t + 1 > washout) {
      features_into(r, g);
      sq += (W_out_ * g - traj.data.row(t + 1).transpose()).cwiseAbs2();
      ++samples;
    }
  }
  drive_into(r, traj.data.row(N - 1).transpose(), scratch);
  r_ = r;

  TrainReport report;
  report.n_train_steps = N;
  report.washout = washout;
  report.residual_rms = (sq / double(samples)).cwiseSqrt();
  report.condition_estimate = (lam_max + params_.eta) / params_.eta;
  if (!report.residual_rms.allFinite())
    throw DivergenceError("training residual non-finite (cond~" +
                              std::to_string(report.condition_estimate) + ")",
                          0);
  return report;
}

TrajectoryBuffer ReservoirModel::predict_closed_loop(const Eigen::MatrixXd& warmup,
                                                     long n_steps,
                                                     const UpdateSchedule* schedule,
                                                     const TrajectoryBuffer* truth) const {
  if (!trained()) throw ConfigError("predict: model is not trained");
  if (warmup.cols() != params_.D_in) throw ConfigError("predict: warmup dimension mismatch");
  if (schedule && !truth) throw ConfigError("predict: schedule given without truth");
  int cps = 1;
  int n_sites = params_.D_in;
  if (truth) {
    if (truth->dim() != params_.D_out) throw ConfigError("predict: truth dimension mismatch");
    if (truth->steps() < n_steps) throw ConfigError("predict: truth shorter than n_steps");
    cps = truth->channels_per_site;
    n_sites = truth->sites();
  }
  std::optional<ScheduleRun> run;
  if (schedule) run.emplace(*schedule, n_sites);

  Eigen::VectorXd r = Eigen::VectorXd::Zero(params_.D_r), scratch(params_.D_r), g(params_.D_r);
  for (long t = 0; t < warmup.rows(); ++t) drive_into(r, warmup.row(t).transpose(), scratch);

  TrajectoryBuffer out;
  out.dt = truth ? truth->dt : 0.0;
  out.channels_per_site = cps;
  if (truth) out.channels = truth->channels;
  out.data.resize(n_steps, params_.D_out);

  Eigen::VectorXd v(params_.D_out);
  for (long t = 0; t < n_steps; ++t) {
    features_into(r, g);
    v.noalias() = W_out_ * g;
    if (!v.allFinite()) throw DivergenceError("closed-loop output diverged", t);
    out.data.row(t) = v;
    if (run) run->apply_in_place(v, truth->data.row(t).transpose(), t, cps);
    drive_into(r, v, scratch);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot format: one JSON text line, then little-endian binary sections in
// header order: W_in (f64 row-major), w_in_cols (u64, grouped only),
// A as rows/cols (u64) + values (f64), W_out (f64 row-major), r (f64).

namespace {

template <class T>
void write_raw(std::ofstream& f, const T* data, size_t count) {
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
}

template <class T>
void read_raw(std::ifstream& f, T* data, size_t count) {
  f.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
  if (!f) throw ConfigError("model snapshot: truncated binary section");
}

}  // namespace

void ReservoirModel::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "rcpred-model-v1";
  header["D_r"] = params_.D_r;
  header["D_in"] = params_.D_in;
  header["D_out"] = params_.D_out;
  header["sigma"] = params_.sigma;
  header["rho"] = params_.rho;
  header["eta"] = params_.eta;
  if (params_.degree) header["degree"] = *params_.degree;
  if (params_.density) header["density"] = *params_.density;
  header["input_structure"] =
      params_.input_structure == InputStructure::Grouped ? "grouped" : "dense";
  header["seed"] = params_.seed;
  header["rebuild_attempts"] = rebuild_attempts_;
  header["nnz"] = static_cast<long>(A_.nonZeros());
  header["trained"] = trained();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << header.dump() << '\n';

  write_raw(f, W_in_.data(), static_cast<size_t>(W_in_.size()));
  if (params_.input_structure == InputStructure::Grouped) {
    std::vector<std::uint64_t> cols(params_.D_r);
    for (int i = 0; i < params_.D_r; ++i) cols[i] = static_cast<std::uint64_t>(w_in_col_[i]);
    write_raw(f, cols.data(), cols.size());
    write_raw(f, w_in_val_.data(), static_cast<size_t>(w_in_val_.size()));
  }
  {
    std::vector<std::uint64_t> rows, cols;
    std::vector<double> vals;
    rows.reserve(A_.nonZeros());
    for (int k = 0; k < A_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A_, k); it; ++it) {
        rows.push_back(static_cast<std::uint64_t>(it.row()));
        cols.push_back(static_cast<std::uint64_t>(it.col()));
        vals.push_back(it.value());
      }
    write_raw(f, rows.data(), rows.size());
    write_raw(f, cols.data(), cols.size());
    write_raw(f, vals.data(), vals.size());
  }
  if (trained()) write_raw(f, W_out_.data(), static_cast<size_t>(W_out_.size()));
  write_raw(f, r_.data(), static_cast<size_t>(r_.size()));
  if (!f) throw ConfigError("write failed: " + path);
}

ReservoirModel ReservoirModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("model snapshot: missing header");
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("format", "") != "rcpred-model-v1")
    throw ConfigError("model snapshot: unknown format");

  ReservoirModel m;
  m.params_.D_r = header.at("D_r").get<int>();
  m.params_.D_in = header.at("D_in").get<int>();
  m.params_.D_out = header.at("D_out").get<int>();
  m.params_.sigma = header.at("sigma").get<double>();
  m.params_.rho = header.at("rho").get<double>();
  m.params_.eta = header.at("eta").get<double>();
  if (header.contains("degree")) m.params_.degree = header["degree"].get<double>();
  if (header.contains("density")) m.params_.density = header["density"].get<double>();
  m.params_.input_structure = header.at("input_structure").get<std::string>() == "grouped"
                                  ? InputStructure::Grouped
                                  : InputStructure::Dense;
  m.params_.seed = header.at("seed").get<std::uint64_t>();
  m.rebuild_attempts_ = header.value("rebuild_attempts", 0);
  const long nnz = header.at("nnz").get<long>();
  const bool trained = header.at("trained").get<bool>();

  const int Dr = m.params_.D_r;
  m.W_in_.resize(Dr, m.params_.D_in);
  read_raw(f, m.W_in_.data(), static_cast<size_t>(m.W_in_.size()));
  if (m.params_.input_structure == InputStructure::Grouped) {
    std::vector<std::uint64_t> cols(Dr);
    read_raw(f, cols.data(), cols.size());
    m.w_in_col_.resize(Dr);
    for (int i = 0; i < Dr; ++i) m.w_in_col_[i] = static_cast<int>(cols[i]);
    m.w_in_val_.resize(Dr);
    read_raw(f, m.w_in_val_.data(), static_cast<size_t>(Dr));
  }
  {
    std::vector<std::uint64_t> rows(nnz), cols(nnz);
    std::vector<double> vals(nnz);
    read_raw(f, rows.data(), rows.size());
    read_raw(f, cols.data(), cols.size());
    read_raw(f, vals.data(), vals.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    for (long k = 0; k < nnz; ++k)
      trips.emplace_back(static_cast<int>(rows[k]), static_cast<int>(cols[k]), vals[k]);
    m.A_.resize(Dr, Dr);
    m.A_.setFromTriplets(trips.begin(), trips.end());
  }
  if (trained) {
    m.W_out_.resize(m.params_.D_out, Dr);
    read_raw(f, m.W_out_.data(), static_cast<size_t>(m.W_out_.size()));
  }
  m.r_.resize(Dr);
  read_raw(f, m.r_.data(), static_cast<size_t>(Dr));
  return m;
}

}  // namespace rcpred
