#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rcpred {

// Time-major buffer of system states: one row per step, one column per
// channel. Complex fields are stored interleaved (re0, im0, re1, im1, ...),
// in which case channels_per_site == 2.
struct TrajectoryBuffer {
  Eigen::MatrixXd data;
  double dt = 0.0;
  std::vector<std::string> channels;
  int channels_per_site = 1;

  long steps() const { return static_cast<long>(data.rows()); }
  long dim() const { return static_cast<long>(data.cols()); }
  int sites() const { return static_cast<int>(data.cols()) / channels_per_site; }

  TrajectoryBuffer slice(long first, long count) const {
    TrajectoryBuffer out;
    out.data = data.middleRows(first, count);
    out.dt = dt;
    out.channels = channels;
    out.channels_per_site = channels_per_site;
    return out;
  }
};

// CSV: header row of channel names, one row per step, full double precision.
void write_csv(const TrajectoryBuffer& traj, const std::string& path);
TrajectoryBuffer read_csv(const std::string& path, double dt);

// Binary: one-line JSON header {rows, cols, dt, channels, channels_per_site}
// followed by row-major little-endian float64 payload.
void write_bin(const TrajectoryBuffer& traj, const std::string& path);
TrajectoryBuffer read_bin(const std::string& path);

// Reads .csv (dt supplied) or .bin (dt from header) based on extension.
TrajectoryBuffer read_trajectory(const std::string& path, double dt_for_csv);

}  // namespace rcpred
