#include "rcpred/trajectory.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcpred/errors.hpp"

namespace rcpred {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

void write_csv(const TrajectoryBuffer& traj, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  std::string line;
  for (long j = 0; j < traj.dim(); ++j) {
    if (j) line += ',';
    line += (j < static_cast<long>(traj.channels.size())) ? traj.channels[j]
                                                          : "c" + std::to_string(j);
  }
  line += '\n';
  f << line;
  for (long i = 0; i < traj.steps(); ++i) {
    line.clear();
    for (long j = 0; j < traj.dim(); ++j) {
      if (j) line += ',';
      append_double(line, traj.data(i, j));
    }
    line += '\n';
    f << line;
  }
  if (!f) throw ConfigError("write failed: " + path);
}

TrajectoryBuffer read_csv(const std::string& path, double dt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open: " + path);
  std::string header;
  if (!std::getline(f, header)) throw ConfigError("empty csv: " + path);
  TrajectoryBuffer traj;
  traj.dt = dt;
  {
    std::stringstream ss(header);
    std::string tok;
    while (std::getline(ss, tok, ',')) traj.channels.push_back(tok);
  }
  const long cols = static_cast<long>(traj.channels.size());
  std::vector<double> vals;
  std::string line;
  long rows = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    long c = 0;
    while (std::getline(ss, tok, ',')) {
      vals.push_back(std::stod(tok));
      ++c;
    }
    if (c != cols) throw ConfigError("ragged csv row in " + path);
    ++rows;
  }
  traj.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      vals.data(), rows, cols);
  return traj;
}

void write_bin(const TrajectoryBuffer& traj, const std::string& path) {
  nlohmann::json header = {
      {"rows", traj.steps()},
      {"cols", traj.dim()},
      {"dt", traj.dt},
      {"channels", traj.channels},
      {"channels_per_site", traj.channels_per_site},
  };
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << header.dump() << '\n';
  // row-major little-endian float64 payload
  for (long i = 0; i < traj.steps(); ++i) {
    Eigen::RowVectorXd row = traj.data.row(i);
    f.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * row.size()));
  }
  if (!f) throw ConfigError("write failed: " + path);
}

TrajectoryBuffer read_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open: " + path);
  std::string header_line;
  if (!std::getline(f, header_line)) throw ConfigError("missing header: " + path);
  nlohmann::json header = nlohmann::json::parse(header_line);
  TrajectoryBuffer traj;
  const long rows = header.at("rows").get<long>();
  const long cols = header.at("cols").get<long>();
  traj.dt = header.at("dt").get<double>();
  traj.channels = header.at("channels").get<std::vector<std::string>>();
  traj.channels_per_site = header.value("channels_per_site", 1);
  traj.data.resize(rows, cols);
  std::vector<double> row(cols);
  for (long i = 0; i < rows; ++i) {
    f.read(reinterpret_cast<char*>(row.data()),
           static_cast<std::streamsize>(sizeof(double) * cols));
    if (!f) throw ConfigError("truncated payload: " + path);
    for (long j = 0; j < cols; ++j) traj.data(i, j) = row[j];
  }
  return traj;
}

TrajectoryBuffer read_trajectory(const std::string& path, double dt_for_csv) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return read_csv(path, dt_for_csv);
  return read_bin(path);
}

}  // namespace rcpred
