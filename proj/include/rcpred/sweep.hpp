#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rcpred {

// Grid of scalar results over two named parameter axes. Masked cells (e.g.
// T0 > T) carry NaN in `values` and true in `masked`; exports write them as
// empty fields and record the sentinel in the metadata.
struct SweepGrid {
  std::string x_name;
  std::string y_name;
  std::vector<double> x_values;
  std::vector<double> y_values;
  Eigen::MatrixXd values;                            // y rows, x cols
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> masked;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> flagged;  // clamped/diverged
  std::string metadata_json;                         // free-form run metadata

  void init(const std::string& xn, const std::string& yn,
            std::vector<double> xs, std::vector<double> ys);
  long nx() const { return static_cast<long>(x_values.size()); }
  long ny() const { return static_cast<long>(y_values.size()); }
};

// CSV matrix with axis headers + JSON sidecar; `base` gets .csv/.json suffixes.
void write_sweep(const SweepGrid& grid, const std::string& base);
SweepGrid read_sweep(const std::string& base);

// Optional quick-look raster: one pixel per cell, log-scaled grayscale,
// masked cells red.
void write_sweep_ppm(const SweepGrid& grid, const std::string& path,
                     double lo = 1e-4, double hi = 10.0);

}  // namespace rcpred
