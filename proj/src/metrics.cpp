#include "rcpred/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "rcpred/errors.hpp"

namespace rcpred {

ErrorSeries error_series(const TrajectoryBuffer& pred, const TrajectoryBuffer& truth,
                         double lambda_max, const ErrorOptions& opts) {
  if (pred.data.rows() != truth.data.rows() || pred.data.cols() != truth.data.cols())
    throw ConfigError("error_series: shape mismatch");
  if (pred.dt != truth.dt) throw ConfigError("error_series: dt mismatch");

  ErrorSeries s;
  s.dt = pred.dt;
  s.lambda_max = lambda_max;
  const long n = pred.steps();
  s.u_rms = std::sqrt(truth.data.cwiseAbs2().sum() / double(n));
  s.e.resize(n);
  for (long t = 0; t < n; ++t)
    s.e[t] = (pred.data.row(t) - truth.data.row(t)).norm() / s.u_rms;

  long window = n;
  if (lambda_max > 0.0) {
    const double steps = opts.window_lyapunov_times / (lambda_max * s.dt);
    window = std::min<long>(n, std::max<long>(1, static_cast<long>(std::llround(steps))));
  }
  s.delta_e = s.e.head(window).mean();

  long run = 0;
  s.horizon_steps = -1;
  for (long t = 0; t < n; ++t) {
    if (s.e[t] > opts.tolerance) {
      if (++run >= opts.confirm_steps) {
        s.horizon_steps = t - opts.confirm_steps + 1;
        break;
      }
    } else {
      run = 0;
    }
  }
  return s;
}

double horizon(const ErrorSeries& series, double tol, long confirm) {
  if (series.lambda_max <= 0.0)
    throw ConfigError("horizon: needs a positive lambda_max");
  long run = 0;
  for (long t = 0; t < series.e.size(); ++t) {
    if (series.e[t] > tol) {
      if (++run >= confirm) return (t - confirm + 1) * series.dt * series.lambda_max;
    } else {
      run = 0;
    }
  }
  return std::numeric_limits<double>::infinity();
}

void write_error_csv(const ErrorSeries& series, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << "t,e\n";
  char buf[80];
  for (long t = 0; t < series.e.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", t * series.dt, series.e[t]);
    f << buf;
  }
}

void write_error_field_csv(const TrajectoryBuffer& pred, const TrajectoryBuffer& truth,
                           const std::string& path) {
  if (pred.data.rows() != truth.data.rows() || pred.data.cols() != truth.data.cols())
    throw ConfigError("error field: shape mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  const int cps = pred.channels_per_site;
  const int sites = pred.sites();
  for (int s = 0; s < sites; ++s) f << (s ? "," : "") << "site" << s;
  f << '\n';
  char buf[40];
  for (long t = 0; t < pred.steps(); ++t) {
    for (int s = 0; s < sites; ++s) {
      double d2 = 0;
      for (int k = 0; k < cps; ++k) {
        const double d = pred.data(t, s * cps + k) - truth.data(t, s * cps + k);
        d2 += d * d;
      }
      std::snprintf(buf, sizeof(buf), "%.10g", std::sqrt(d2));
      f << (s ? "," : "") << buf;
    }
    f << '\n';
  }
}

}  // namespace rcpred
