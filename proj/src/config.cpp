#include "rcpred/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rcpred/errors.hpp"

namespace rcpred {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
T optional_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

SystemConfig parse_system(const json& j) {
  reject_unknown(j, {"name", "dt", "discard", "ic_seed", "substeps", "L", "M",
                     "alpha", "beta"},
                 "system");
  SystemConfig s;
  s.name = require<std::string>(j, "name", "system");
  s.is_pde = (s.name == "kse" || s.name == "cgle");
  if (!s.is_pde) ode_from_string(s.name);  // validates the name
  if (s.is_pde) {
    s.L = require<double>(j, "L", "system");
    s.M = require<int>(j, "M", "system");
    if (s.name == "cgle") {
      s.alpha = require<double>(j, "alpha", "system");
      s.beta = require<double>(j, "beta", "system");
    } else if (j.contains("alpha") || j.contains("beta")) {
      throw ConfigError("system: alpha/beta only apply to cgle");
    }
    if (j.contains("substeps")) throw ConfigError("system: substeps only applies to ODEs");
  } else if (j.contains("L") || j.contains("M") || j.contains("alpha") || j.contains("beta")) {
    throw ConfigError("system: L/M/alpha/beta only apply to PDEs");
  }
  s.dt = require<double>(j, "dt", "system");
  s.discard = optional_or<long>(j, "discard", s.is_pde ? 2000 : 5000);
  s.ic_seed = optional_or<std::uint64_t>(j, "ic_seed", 1);
  if (!s.is_pde) s.substeps = optional_or<int>(j, "substeps", make_ode(ode_from_string(s.name)).substeps);
  s.make_ode_system();  // validate by construction
  return s;
}

ReservoirParams parse_reservoir(const json& j, const SystemConfig& sys) {
  reject_unknown(j, {"D_r", "sigma", "rho", "eta", "degree", "density",
                     "input_structure", "seed"},
                 "reservoir");
  ReservoirParams p;
  p.D_r = require<int>(j, "D_r", "reservoir");
  p.D_in = sys.input_dim();
  p.D_out = sys.input_dim();
  p.sigma = require<double>(j, "sigma", "reservoir");
  p.rho = require<double>(j, "rho", "reservoir");
  p.eta = require<double>(j, "eta", "reservoir");
  if (j.contains("degree")) p.degree = j.at("degree").get<double>();
  if (j.contains("density")) p.density = j.at("density").get<double>();
  const std::string structure = optional_or<std::string>(j, "input_structure", "grouped");
  if (structure == "grouped")
    p.input_structure = InputStructure::Grouped;
  else if (structure == "dense")
    p.input_structure = InputStructure::Dense;
  else
    throw ConfigError("reservoir: input_structure must be 'grouped' or 'dense'");
  p.seed = optional_or<std::uint64_t>(j, "seed", 1);
  p.validate();
  return p;
}

UpdateSchedule parse_schedule(const json& j, const SystemConfig& sys) {
  reject_unknown(j, {"mode", "c", "T", "T0", "M_c", "sites", "p_t", "p_s", "seed"},
                 "schedule");
  const std::string mode = require<std::string>(j, "mode", "schedule");
  UpdateSchedule s;
  if (mode == "regular") {
    s.mode = UpdateSchedule::Mode::Regular;
    s.T = require<long>(j, "T", "schedule");
    s.T0 = optional_or<long>(j, "T0", 1);
    if (j.contains("sites"))
      s.sites = j.at("sites").get<std::vector<int>>();
    if (j.contains("M_c")) s.M_c = j.at("M_c").get<int>();
    if (!s.sites && !s.M_c) s.M_c = sys.site_count();
  } else if (mode == "random") {
    s.mode = UpdateSchedule::Mode::Random;
    s.p_t = require<double>(j, "p_t", "schedule");
    s.p_s = require<double>(j, "p_s", "schedule");
    s.seed = optional_or<std::uint64_t>(j, "seed", 1);
    if (j.contains("T") || j.contains("T0") || j.contains("M_c") || j.contains("sites"))
      throw ConfigError("schedule: regular keys given in random mode");
  } else {
    throw ConfigError("schedule: mode must be 'regular' or 'random'");
  }
  s.c = require<double>(j, "c", "schedule");
  s.validate(sys.site_count());
  return s;
}

SweepAxis parse_axis(const json& j, const std::string& where) {
  reject_unknown(j, {"param", "values"}, where);
  SweepAxis axis;
  axis.param = require<std::string>(j, "param", where);
  if (axis.param != "T" && axis.param != "T0" && axis.param != "p_t" && axis.param != "p_s")
    throw ConfigError(where + ": param must be one of T, T0, p_t, p_s");
  axis.values = require<std::vector<double>>(j, "values", where);
  if (axis.values.empty()) throw ConfigError(where + ": empty values");
  return axis;
}

}  // namespace

OdeSystem SystemConfig::make_ode_system() const {
  if (is_pde) throw ConfigError("not an ODE system: " + name);
  OdeSystem sys = make_ode(ode_from_string(name), dt);
  sys.substeps = substeps;
  if (dt <= 0) throw ConfigError("system: dt must be positive");
  return sys;
}

PdeSystem SystemConfig::make_pde_system() const {
  if (!is_pde) throw ConfigError("not a PDE system: " + name);
  if (name == "kse") return make_kse(L, M, dt);
  return make_cgle(L, M, dt, alpha, beta);
}

int SystemConfig::input_dim() const {
  if (!is_pde) return 3;
  return name == "cgle" ? 2 * M : M;
}

int SystemConfig::site_count() const { return is_pde ? M : 3; }

int SystemConfig::channels_per_site() const { return name == "cgle" ? 2 : 1; }

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root,
                 {"system", "reservoir", "training", "prediction", "evaluation",
                  "schedule", "sweep", "lyapunov"},
                 "config root");
  ExperimentConfig cfg;
  if (!root.contains("system")) throw ConfigError("config: missing system block");
  cfg.system = parse_system(root["system"]);
  if (!root.contains("reservoir")) throw ConfigError("config: missing reservoir block");
  cfg.reservoir = parse_reservoir(root["reservoir"], cfg.system);

  {
    const json j = root.value("training", json::object());
    reject_unknown(j, {"n_steps", "washout", "input_noise", "noise_seed"}, "training");
    cfg.training.n_steps = optional_or<long>(j, "n_steps", cfg.system.is_pde ? 80000 : 50000);
    cfg.training.washout = optional_or<long>(j, "washout", 1000);
    cfg.training.input_noise = optional_or<double>(j, "input_noise", 0.0);
    cfg.training.noise_seed = optional_or<std::uint64_t>(j, "noise_seed", 1);
    if (cfg.training.n_steps <= cfg.training.washout + 1)
      throw ConfigError("training: n_steps must exceed washout + 1");
  }
  {
    const json j = root.value("prediction", json::object());
    reject_unknown(j, {"n_steps", "warmup"}, "prediction");
    cfg.prediction.n_steps = optional_or<long>(j, "n_steps", 10000);
    cfg.prediction.warmup = optional_or<long>(j, "warmup", 100);
    if (cfg.prediction.warmup > cfg.training.n_steps)
      throw ConfigError("prediction: warmup longer than the training segment");
  }
  {
    const json j = root.value("evaluation", json::object());
    reject_unknown(j, {"tolerance", "confirm_steps", "lambda_max", "window_lyapunov_times"},
                   "evaluation");
    cfg.evaluation.tolerance = optional_or<double>(j, "tolerance", 0.05);
    cfg.evaluation.confirm_steps = optional_or<long>(j, "confirm_steps", 10);
    cfg.evaluation.lambda_max = optional_or<double>(j, "lambda_max", 0.0);
    cfg.evaluation.window_lyapunov_times = optional_or<double>(j, "window_lyapunov_times", 100.0);
  }
  if (root.contains("schedule") && !root["schedule"].is_null())
    cfg.schedule = parse_schedule(root["schedule"], cfg.system);
  if (root.contains("sweep")) {
    const json& j = root["sweep"];
    reject_unknown(j, {"x", "y", "schedule_seeds"}, "sweep");
    SweepConfig sw;
    if (!j.contains("x") || !j.contains("y")) throw ConfigError("sweep: needs x and y axes");
    sw.x = parse_axis(j["x"], "sweep.x");
    sw.y = parse_axis(j["y"], "sweep.y");
    sw.schedule_seeds = optional_or<int>(j, "schedule_seeds", 4);
    if (sw.schedule_seeds < 1) throw ConfigError("sweep: schedule_seeds must be >= 1");
    cfg.sweep = sw;
  }
  {
    const json j = root.value("lyapunov", json::object());
    reject_unknown(j, {"n_steps", "renorm_interval"}, "lyapunov");
    cfg.lyapunov.n_steps = optional_or<long>(j, "n_steps", 400000);
    cfg.lyapunov.renorm_interval = optional_or<long>(j, "renorm_interval", 10);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string ExperimentConfig::canonical_json() const {
  json root;
  json sys;
  sys["name"] = system.name;
  sys["dt"] = system.dt;
  sys["discard"] = system.discard;
  sys["ic_seed"] = system.ic_seed;
  if (system.is_pde) {
    sys["L"] = system.L;
    sys["M"] = system.M;
    if (system.name == "cgle") {
      sys["alpha"] = system.alpha;
      sys["beta"] = system.beta;
    }
  } else {
    sys["substeps"] = system.substeps;
  }
  root["system"] = sys;

  json res;
  res["D_r"] = reservoir.D_r;
  res["sigma"] = reservoir.sigma;
  res["rho"] = reservoir.rho;
  res["eta"] = reservoir.eta;
  if (reservoir.degree) res["degree"] = *reservoir.degree;
  if (reservoir.density) res["density"] = *reservoir.density;
  res["input_structure"] =
      reservoir.input_structure == InputStructure::Grouped ? "grouped" : "dense";
  res["seed"] = reservoir.seed;
  root["reservoir"] = res;

  root["training"] = {{"n_steps", training.n_steps},
                      {"washout", training.washout},
                      {"input_noise", training.input_noise},
                      {"noise_seed", training.noise_seed}};
  root["prediction"] = {{"n_steps", prediction.n_steps}, {"warmup", prediction.warmup}};
  root["evaluation"] = {{"tolerance", evaluation.tolerance},
                        {"confirm_steps", evaluation.confirm_steps},
                        {"lambda_max", evaluation.lambda_max},
                        {"window_lyapunov_times", evaluation.window_lyapunov_times}};
  if (schedule) {
    json s;
    s["c"] = schedule->c;
    if (schedule->mode == UpdateSchedule::Mode::Regular) {
      s["mode"] = "regular";
      s["T"] = schedule->T;
      s["T0"] = schedule->T0;
      if (schedule->M_c) s["M_c"] = *schedule->M_c;
      if (schedule->sites) s["sites"] = *schedule->sites;
    } else {
      s["mode"] = "random";
      s["p_t"] = schedule->p_t;
      s["p_s"] = schedule->p_s;
      s["seed"] = schedule->seed;
    }
    root["schedule"] = s;
  }
  if (sweep) {
    root["sweep"] = {{"x", {{"param", sweep->x.param}, {"values", sweep->x.values}}},
                     {"y", {{"param", sweep->y.param}, {"values", sweep->y.values}}},
                     {"schedule_seeds", sweep->schedule_seeds}};
  }
  root["lyapunov"] = {{"n_steps", lyapunov.n_steps},
                      {"renorm_interval", lyapunov.renorm_interval}};
  return root.dump(2);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_json())));
  return buf;
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open for writing: " + path);
  f << cfg.canonical_json() << '\n';
}

}  // namespace rcpred
