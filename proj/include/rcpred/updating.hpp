#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace rcpred {

// When and where true data is injected into the closed prediction loop.
//
// Regular mode: time is divided into periods of T steps; the first T0 steps
// of each period are active. Sites are either M_c equally spaced points out
// of M (M must be divisible by M_c) or an explicit site list.
// Random mode: the site subset is drawn once per run from Bernoulli(p_s);
// each step is active independently with probability p_t.
struct UpdateSchedule {
  enum class Mode { Regular, Random };

  Mode mode = Mode::Regular;
  double c = 1.0;

  // regular
  long T = 0;
  long T0 = 0;
  std::optional<int> M_c;
  std::optional<std::vector<int>> sites;

  // random
  double p_t = 0.0;
  double p_s = 0.0;
  std::uint64_t seed = 0;

  static UpdateSchedule regular(long T, long T0, double c, int M_c);
  static UpdateSchedule regular_sites(long T, long T0, double c, std::vector<int> sites);
  static UpdateSchedule random(double p_t, double p_s, double c, std::uint64_t seed);

  // Throws ConfigError on violated constraints (needs M for site checks).
  void validate(int n_sites) const;

  bool step_active(long t) const;
};

using SiteMask = Eigen::Array<bool, Eigen::Dynamic, 1>;

// Site mask at step t for a system with M sites. Pure in (schedule, t, M).
SiteMask active_mask(const UpdateSchedule& sched, long t, int n_sites);

// v' = v + c (u - v) on channels whose site is masked; identity elsewhere.
// For interleaved complex data both channels of a site share its mask.
Eigen::VectorXd apply_update(const Eigen::VectorXd& v, const Eigen::VectorXd& u_true,
                             const SiteMask& mask, double c, int channels_per_site = 1);

// Caches the per-run site subset so the hot loop only tests step activity.
class ScheduleRun {
 public:
  ScheduleRun(const UpdateSchedule& sched, int n_sites);

  bool step_active(long t) const { return sched_.step_active(t); }
  const SiteMask& site_mask() const { return site_mask_; }
  const UpdateSchedule& schedule() const { return sched_; }

  void apply_in_place(Eigen::VectorXd& v, const Eigen::VectorXd& u_true,
                      long t, int channels_per_site) const;

 private:
  UpdateSchedule sched_;
  SiteMask site_mask_;
};

}  // namespace rcpred
