#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aoisched/fluid.hpp"
#include "aoisched/relaxed_solver.hpp"
#include "aoisched/system.hpp"

namespace aoisched {

// Age update of one user over one slot: reset on a decoded transmission,
// otherwise grow by one.
inline std::int64_t age_step(std::int64_t age, bool scheduled, bool success) {
  return (scheduled && success) ? 1 : age + 1;
}

// Counter-based generator: an independent uniform in [0,1) per
// (seed, slot, user), so runs reproduce bit-exactly regardless of execution
// order or thread count.
double channel_uniform(std::uint64_t seed, std::uint64_t slot, std::uint64_t user);
std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t run);
extern const char* const kRngAlgorithm;

enum class Policy { kWhittle, kMixedThreshold, kMaxAgeGreedy };
const char* policy_name(Policy policy);
Policy policy_from_name(const std::string& name);

struct UserRef {
  std::size_t cls = 0;
  std::int64_t age = 1;
};

// Top-m selection by descending index value; ties go to the larger p, then
// the lower age, then the lower user id. Returns the selected positions.
std::vector<std::size_t> whittle_schedule(const std::vector<UserRef>& users,
                                          const SystemConfig& config, std::int64_t m);

// Top-m selection by age alone (same tie-breaks). Coincides with
// whittle_schedule whenever every class has the same p.
std::vector<std::size_t> greedy_schedule(const std::vector<UserRef>& users,
                                         const SystemConfig& config, std::int64_t m);

// Per-class age histogram divided by the total number of users.
std::vector<std::vector<double>> empirical_proportions(const std::vector<UserRef>& users,
                                                       const SystemConfig& config);

struct SimConfig {
  explicit SimConfig(SystemConfig sys) : system(std::move(sys)) {}

  SystemConfig system;
  std::int64_t n_users = 0;
  std::int64_t horizon = 0;
  std::uint64_t seed = 0;
  Policy policy = Policy::kWhittle;
  std::optional<RelaxedSolution> relaxed;  // required by kMixedThreshold
  double burn_in_frac = 0.1;
  bool require_integral_budget = false;  // reject alpha*N away from an integer
  bool record_proportions = false;
  std::int64_t proportion_stride = 1;
  // Optional references for deviation tracking, sampled at the stride.
  const std::vector<std::vector<std::vector<double>>>* fluid_trajectory = nullptr;
  const FixedPointVector* z_star = nullptr;
  // Default start: every age at 1. Otherwise per-class proportions whose
  // masses must be realizable as integer counts at n_users.
  std::optional<std::vector<std::vector<double>>> initial_proportions;
};

struct SimMetrics {
  std::int64_t n_users = 0;
  std::int64_t m_budget = 0;
  std::int64_t horizon = 0;
  std::int64_t burn_in_slots = 0;
  std::uint64_t seed = 0;
  std::string policy;
  std::string rng_algorithm;
  double avg_age_per_user = 0.0;         // time- and user-averaged, full horizon
  double avg_age_per_user_burned = 0.0;  // after discarding the burn-in window
  std::vector<double> per_class_avg_age;
  double utilization = 0.0;  // transmissions over the budget actually offered
  std::int64_t min_scheduled_per_slot = 0;
  std::int64_t max_scheduled_per_slot = 0;
  std::vector<std::pair<std::int64_t, double>> norm_to_fluid;
  std::vector<std::pair<std::int64_t, double>> norm_to_zstar;
  double sup_norm_to_fluid = 0.0;
  std::vector<std::pair<std::int64_t, std::vector<std::vector<double>>>> snapshots;

  bool operator==(const SimMetrics&) const = default;
};

// Runs the N-user system for the configured horizon. Deterministic given the
// config (including the seed); channel outcomes are drawn independently per
// scheduled user.
SimMetrics simulate(const SimConfig& config);

struct KurtzRow {
  std::int64_t n = 0;
  int seeds = 0;
  double exceed_prob = 0.0;
  double n_times_prob = 0.0;  // for the 1/N-decay reading
  double median_sup = 0.0;
  double max_sup = 0.0;
};

struct KurtzTable {
  double mu = 0.0;
  bool mu_was_auto = false;
  std::int64_t horizon = 0;
  std::vector<KurtzRow> rows;
};

// For each population size, the fraction of seeded runs whose trajectory
// deviates from the shared fluid path by at least mu (sup over the horizon,
// weighted norm). When mu is absent it is set to twice the median deviation
// observed at the largest N.
KurtzTable kurtz_experiment(const SystemConfig& system, const std::vector<std::int64_t>& n_list,
                            std::int64_t horizon, int seeds, std::optional<double> mu,
                            std::uint64_t base_seed, int threads,
                            const std::optional<std::vector<std::vector<double>>>& init = {});

}  // namespace aoisched
