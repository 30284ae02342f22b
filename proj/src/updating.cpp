#include "rcpred/updating.hpp"

#include <algorithm>

#include "rcpred/errors.hpp"
#include "rcpred/rng.hpp"

namespace rcpred {

UpdateSchedule UpdateSchedule::regular(long T, long T0, double c, int M_c) {
  UpdateSchedule s;
  s.mode = Mode::Regular;
  s.T = T;
  s.T0 = T0;
  s.c = c;
  s.M_c = M_c;
  return s;
}

UpdateSchedule UpdateSchedule::regular_sites(long T, long T0, double c,
                                             std::vector<int> sites) {
  UpdateSchedule s;
  s.mode = Mode::Regular;
  s.T = T;
  s.T0 = T0;
  s.c = c;
  s.sites = std::move(sites);
  return s;
}

UpdateSchedule UpdateSchedule::random(double p_t, double p_s, double c,
                                      std::uint64_t seed) {
  UpdateSchedule s;
  s.mode = Mode::Random;
  s.p_t = p_t;
  s.p_s = p_s;
  s.c = c;
  s.seed = seed;
  return s;
}

void UpdateSchedule::validate(int n_sites) const {
  if (c < 0.0 || c > 2.0) throw ConfigError("schedule: coupling c must be in [0, 2]");
  if (mode == Mode::Regular) {
    if (T < 1) throw ConfigError("schedule: period T must be >= 1");
    if (T0 < 1 || T0 > T) throw ConfigError("schedule: need 1 <= T0 <= T");
    if (M_c && sites) throw ConfigError("schedule: give M_c or sites, not both");
    if (!M_c && !sites) throw ConfigError("schedule: regular mode needs M_c or sites");
    if (M_c) {
      if (*M_c < 1 || *M_c > n_sites)
        throw ConfigError("schedule: M_c out of range");
      if (n_sites % *M_c != 0)
        throw ConfigError("schedule: site count " + std::to_string(n_sites) +
                          " not divisible by M_c " + std::to_string(*M_c));
    }
    if (sites) {
      if (sites->empty()) throw ConfigError("schedule: empty site list");
      for (int s : *sites)
        if (s < 0 || s >= n_sites) throw ConfigError("schedule: site index out of range");
    }
  } else {
    if (p_t < 0.0 || p_t > 1.0 || p_s < 0.0 || p_s > 1.0)
      throw ConfigError("schedule: p_t and p_s must be in [0, 1]");
  }
}

bool UpdateSchedule::step_active(long t) const {
  if (mode == Mode::Regular) return (t % T) < T0;
  return counter_uniform(Rng::derive(seed, 0x7137), static_cast<std::uint64_t>(t)) < p_t;
}

SiteMask active_mask(const UpdateSchedule& sched, long t, int n_sites) {
  if (t < 0) throw ConfigError("active_mask: negative step index");
  sched.validate(n_sites);
  SiteMask mask = SiteMask::Constant(n_sites, false);
  if (!sched.step_active(t)) return mask;
  if (sched.mode == UpdateSchedule::Mode::Regular) {
    if (sched.sites) {
      for (int s : *sched.sites) mask[s] = true;
    } else {
      const int stride = n_sites / *sched.M_c;
      for (int j = 0; j < *sched.M_c; ++j) mask[j * stride] = true;
    }
  } else {
    Rng rng(Rng::derive(sched.seed, 0x5173));
    for (int i = 0; i < n_sites; ++i) mask[i] = rng.bernoulli(sched.p_s);
  }
  return mask;
}

Eigen::VectorXd apply_update(const Eigen::VectorXd& v, const Eigen::VectorXd& u_true,
                             const SiteMask& mask, double c, int channels_per_site) {
  if (v.size() != u_true.size())
    throw ConfigError("apply_update: length mismatch");
  if (mask.size() * channels_per_site != v.size())
    throw ConfigError("apply_update: mask does not cover the state");
  Eigen::VectorXd out = v;
  for (long j = 0; j < v.size(); ++j)
    if (mask[j / channels_per_site]) out[j] = v[j] + c * (u_true[j] - v[j]);
  return out;
}

ScheduleRun::ScheduleRun(const UpdateSchedule& sched, int n_sites) : sched_(sched) {
  sched_.validate(n_sites);
  site_mask_ = SiteMask::Constant(n_sites, false);
  if (sched_.mode == UpdateSchedule::Mode::Regular) {
    if (sched_.sites) {
      for (int s : *sched_.sites) site_mask_[s] = true;
    } else {
      const int stride = n_sites / *sched_.M_c;
      for (int j = 0; j < *sched_.M_c; ++j) site_mask_[j * stride] = true;
    }
  } else {
    Rng rng(Rng::derive(sched_.seed, 0x5173));
    for (int i = 0; i < n_sites; ++i) site_mask_[i] = rng.bernoulli(sched_.p_s);
  }
}

void ScheduleRun::apply_in_place(Eigen::VectorXd& v, const Eigen::VectorXd& u_true,
                                 long t, int channels_per_site) const {
  if (!step_active(t)) return;
  for (long j = 0; j < v.size(); ++j)
    if (site_mask_[j / channels_per_site]) v[j] += sched_.c * (u_true[j] - v[j]);
}

}  // namespace rcpred
