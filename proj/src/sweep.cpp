#include "rcpred/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rcpred/errors.hpp"

namespace rcpred {

void SweepGrid::init(const std::string& xn, const std::string& yn,
                     std::vector<double> xs, std::vector<double> ys) {
  x_name = xn;
  y_name = yn;
  x_values = std::move(xs);
  y_values = std::move(ys);
  if (x_values.empty() || y_values.empty())
    throw ConfigError("sweep grid: empty axis");
  values = Eigen::MatrixXd::Constant(ny(), nx(), std::numeric_limits<double>::quiet_NaN());
  masked.setConstant(ny(), nx(), false);
  flagged.setConstant(ny(), nx(), false);
}

void write_sweep(const SweepGrid& grid, const std::string& base) {
  {
    std::ofstream f(base + ".csv", std::ios::binary);
    if (!f) throw ConfigError("cannot open for writing: " + base + ".csv");
    char buf[40];
    f << grid.y_name << '\\' << grid.x_name;
    for (double x : grid.x_values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", x);
      f << buf;
    }
    f << '\n';
    for (long iy = 0; iy < grid.ny(); ++iy) {
      std::snprintf(buf, sizeof(buf), "%.17g", grid.y_values[iy]);
      f << buf;
      for (long ix = 0; ix < grid.nx(); ++ix) {
        if (grid.masked(iy, ix)) {
          f << ',';
        } else {
          std::snprintf(buf, sizeof(buf), ",%.17g", grid.values(iy, ix));
          f << buf;
        }
      }
      f << '\n';
    }
  }
  nlohmann::json meta;
  meta["x_name"] = grid.x_name;
  meta["y_name"] = grid.y_name;
  meta["x_values"] = grid.x_values;
  meta["y_values"] = grid.y_values;
  meta["masked_sentinel"] = "empty CSV field; cell undefined (e.g. T0 > T)";
  std::vector<std::array<long, 2>> flagged_cells;
  for (long iy = 0; iy < grid.ny(); ++iy)
    for (long ix = 0; ix < grid.nx(); ++ix)
      if (grid.flagged(iy, ix)) flagged_cells.push_back({iy, ix});
  meta["flagged_cells"] = flagged_cells;
  if (!grid.metadata_json.empty())
    meta["run"] = nlohmann::json::parse(grid.metadata_json);
  std::ofstream f(base + ".json", std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + base + ".json");
  f << meta.dump(2) << '\n';
}

SweepGrid read_sweep(const std::string& base) {
  std::ifstream jf(base + ".json");
  if (!jf) throw ConfigError("cannot open: " + base + ".json");
  nlohmann::json meta = nlohmann::json::parse(jf);
  SweepGrid grid;
  grid.init(meta.at("x_name").get<std::string>(), meta.at("y_name").get<std::string>(),
            meta.at("x_values").get<std::vector<double>>(),
            meta.at("y_values").get<std::vector<double>>());
  if (meta.contains("run")) grid.metadata_json = meta["run"].dump();
  for (auto& cell : meta.at("flagged_cells"))
    grid.flagged(cell[0].get<long>(), cell[1].get<long>()) = true;

  std::ifstream f(base + ".csv");
  if (!f) throw ConfigError("cannot open: " + base + ".csv");
  std::string line;
  std::getline(f, line);  // header
  for (long iy = 0; iy < grid.ny(); ++iy) {
    if (!std::getline(f, line)) throw ConfigError("sweep csv: missing row");
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');  // y value
    for (long ix = 0; ix < grid.nx(); ++ix) {
      if (!std::getline(ss, tok, ',')) tok = "";
      if (tok.empty()) {
        grid.masked(iy, ix) = true;
        grid.values(iy, ix) = std::numeric_limits<double>::quiet_NaN();
      } else {
        grid.masked(iy, ix) = false;
        grid.values(iy, ix) = std::stod(tok);
      }
    }
  }
  return grid;
}

void write_sweep_ppm(const SweepGrid& grid, const std::string& path, double lo, double hi) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  const long W = grid.nx(), H = grid.ny();
  f << "P6\n" << W << ' ' << H << "\n255\n";
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (long iy = 0; iy < H; ++iy) {
    for (long ix = 0; ix < W; ++ix) {
      unsigned char rgb[3];
      if (grid.masked(iy, ix) || !std::isfinite(grid.values(iy, ix))) {
        rgb[0] = 160; rgb[1] = 0; rgb[2] = 0;  // masked: dark red
      } else {
        double v = std::max(grid.values(iy, ix), lo);
        double t = (std::log10(v) - llo) / (lhi - llo);
        t = std::min(1.0, std::max(0.0, t));
        const auto b = static_cast<unsigned char>(std::lround(255 * (1.0 - t)));
        rgb[0] = b; rgb[1] = b; rgb[2] = b;  // bright = small value
      }
      f.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
}

}  // namespace rcpred
