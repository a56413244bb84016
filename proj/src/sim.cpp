#include "aoisched/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aoisched/policy_core.hpp"
#include "parallel_for.hpp"

namespace aoisched {

namespace {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Slot value reserved for the one-off per-user draws (policy randomization).
constexpr std::uint64_t kAssignSlot = 0xFFFFFFFFFFFFFFFFull;

}  // namespace

const char* const kRngAlgorithm = "splitmix64-chain-v1";

double channel_uniform(std::uint64_t seed, std::uint64_t slot, std::uint64_t user) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ slot);
  h = mix64(h ^ user);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::uint64_t derive_run_seed(std::uint64_t base_seed, std::uint64_t n, std::uint64_t run) {
  std::uint64_t h = mix64(base_seed);
  h = mix64(h ^ n);
  return mix64(h ^ run);
}

const char* policy_name(Policy policy) {
  switch (policy) {
    case Policy::kWhittle: return "whittle";
    case Policy::kMixedThreshold: return "mixed_threshold";
    case Policy::kMaxAgeGreedy: return "max_age_greedy";
  }
  return "unknown";
}

Policy policy_from_name(const std::string& name) {
  if (name == "whittle") return Policy::kWhittle;
  if (name == "mixed_threshold") return Policy::kMixedThreshold;
  if (name == "max_age_greedy") return Policy::kMaxAgeGreedy;
  throw std::invalid_argument("unknown policy: " + name);
}

namespace {

// Shared top-m selection for the reference schedulers; `key` maps a user to
// its priority value.
template <class Key>
std::vector<std::size_t> top_m(const std::vector<UserRef>& users, const SystemConfig& config,
                               std::int64_t m, Key key) {
  for (const UserRef& u : users) {
    if (u.cls >= config.num_classes() || u.age < 1) {
      throw std::invalid_argument("schedule: bad user reference");
    }
  }
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ka = key(users[a]);
    const double kb = key(users[b]);
    if (ka != kb) return ka > kb;
    const double pa = config.cls(users[a].cls).p;
    const double pb = config.cls(users[b].cls).p;
    if (pa != pb) return pa > pb;
    if (users[a].age != users[b].age) return users[a].age < users[b].age;
    return a < b;
  });
  const std::size_t take = static_cast<std::size_t>(
      std::min<std::int64_t>(m, static_cast<std::int64_t>(users.size())));
  std::vector<std::size_t> picked(order.begin(), order.begin() + take);
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace

std::vector<std::size_t> whittle_schedule(const std::vector<UserRef>& users,
                                          const SystemConfig& config, std::int64_t m) {
  return top_m(users, config, m,
               [&](const UserRef& u) { return whittle_index(config.cls(u.cls).p, u.age); });
}

std::vector<std::size_t> greedy_schedule(const std::vector<UserRef>& users,
                                         const SystemConfig& config, std::int64_t m) {
  return top_m(users, config, m,
               [](const UserRef& u) { return static_cast<double>(u.age); });
}

std::vector<std::vector<double>> empirical_proportions(const std::vector<UserRef>& users,
                                                       const SystemConfig& config) {
  std::vector<std::vector<std::int64_t>> counts(config.num_classes());
  for (const UserRef& u : users) {
    if (u.cls >= config.num_classes() || u.age < 1) {
      throw std::invalid_argument("empirical_proportions: bad user reference");
    }
    std::vector<std::int64_t>& cls = counts[u.cls];
    if (cls.size() < static_cast<std::size_t>(u.age)) {
      cls.resize(static_cast<std::size_t>(u.age), 0);
    }
    ++cls[static_cast<std::size_t>(u.age - 1)];
  }
  // One division per bin keeps each entry an exactly-rounded rational count.
  std::vector<std::vector<double>> z(config.num_classes());
  const double n = static_cast<double>(users.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    z[k].resize(counts[k].size());
    for (std::size_t i = 0; i < counts[k].size(); ++i) {
      z[k][i] = static_cast<double>(counts[k][i]) / n;
    }
  }
  return z;
}

namespace {

struct Layout {
  std::vector<std::int64_t> class_count;
  std::vector<std::int64_t> class_offset;
  std::int64_t m_budget = 0;
};

Layout make_layout(const SimConfig& cfg) {
  if (cfg.n_users < 1) throw std::invalid_argument("simulate: n_users must be >= 1");
  if (cfg.horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
  if (cfg.proportion_stride < 1) throw std::invalid_argument("simulate: stride must be >= 1");
  if (!(cfg.burn_in_frac >= 0.0 && cfg.burn_in_frac < 1.0)) {
    throw std::invalid_argument("simulate: burn_in_frac must be in [0, 1)");
  }
  Layout lay;
  std::int64_t total = 0;
  for (std::size_t k = 0; k < cfg.system.num_classes(); ++k) {
    const double exact = cfg.system.cls(k).share * static_cast<double>(cfg.n_users);
    const std::int64_t count = std::llround(exact);
    if (std::abs(exact - static_cast<double>(count)) > 1e-9 || count < 1) {
      throw std::invalid_argument("simulate: class " + std::to_string(k + 1) +
                                  " share does not give an integer user count at N = " +
                                  std::to_string(cfg.n_users));
    }
    lay.class_offset.push_back(total);
    lay.class_count.push_back(count);
    total += count;
  }
  if (total != cfg.n_users) {
    throw std::invalid_argument("simulate: class counts do not add up to n_users");
  }
  const double exact_m = cfg.system.alpha() * static_cast<double>(cfg.n_users);
  lay.m_budget = std::llround(exact_m);
  if (cfg.require_integral_budget && std::abs(exact_m - static_cast<double>(lay.m_budget)) > 1e-9) {
    throw std::invalid_argument("simulate: alpha * N is not an integer budget");
  }
  if (lay.m_budget < 1) throw std::invalid_argument("simulate: budget rounds to zero users");
  return lay;
}

std::vector<std::int32_t> initial_ages(const SimConfig& cfg, const Layout& lay) {
  std::vector<std::int32_t> ages(static_cast<std::size_t>(cfg.n_users), 1);
  if (!cfg.initial_proportions) return ages;
  const std::vector<std::vector<double>>& init = *cfg.initial_proportions;
  if (init.size() != cfg.system.num_classes()) {
    throw std::invalid_argument("simulate: initial proportions class count mismatch");
  }
  for (std::size_t k = 0; k < init.size(); ++k) {
    std::int64_t assigned = 0;
    std::int64_t u = lay.class_offset[k];
    for (std::size_t i = 0; i < init[k].size(); ++i) {
      const double exact = init[k][i] * static_cast<double>(cfg.n_users);
      const std::int64_t count = std::llround(exact);
      if (std::abs(exact - static_cast<double>(count)) > 1e-9 || count < 0) {
        throw std::invalid_argument("simulate: initial proportion at class " +
                                    std::to_string(k + 1) + " age " + std::to_string(i + 1) +
                                    " is not realizable at N = " + std::to_string(cfg.n_users));
      }
      for (std::int64_t c = 0; c < count; ++c) {
        ages[static_cast<std::size_t>(u++)] = static_cast<std::int32_t>(i + 1);
      }
      assigned += count;
    }
    if (assigned != lay.class_count[k]) {
      throw std::invalid_argument("simulate: initial proportions of class " +
                                  std::to_string(k + 1) + " do not cover its share");
    }
  }
  return ages;
}

// Norm between the empirical histogram counts/N and a reference mass vector.
double histogram_distance(const std::vector<std::vector<std::int32_t>>& counts, double n,
                          const std::vector<std::vector<double>>& ref) {
  double s = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const std::size_t len = std::max(counts[k].size(), ref[k].size());
    for (std::size_t i = 0; i < len; ++i) {
      const double a = i < counts[k].size() ? static_cast<double>(counts[k][i]) / n : 0.0;
      const double b = i < ref[k].size() ? ref[k][i] : 0.0;
      s += static_cast<double>(i + 1) * std::abs(a - b);
    }
  }
  return s;
}

}  // namespace

SimMetrics simulate(const SimConfig& cfg) {
  const Layout lay = make_layout(cfg);
  const std::size_t k_count = cfg.system.num_classes();
  const std::int64_t n = cfg.n_users;
  const std::int64_t horizon = cfg.horizon;

  std::vector<std::int32_t> ages = initial_ages(cfg, lay);

  // Per-user thresholds for the relaxed-optimal policy: each user commits to
  // the upper threshold with probability theta, independently, at slot 0.
  std::vector<std::int32_t> user_threshold;
  if (cfg.policy == Policy::kMixedThreshold) {
    if (!cfg.relaxed) {
      throw std::invalid_argument("simulate: mixed_threshold needs a RelaxedSolution");
    }
    user_threshold.resize(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::int64_t u = lay.class_offset[k]; u < lay.class_offset[k] + lay.class_count[k];
           ++u) {
        const double draw = channel_uniform(cfg.seed, kAssignSlot, static_cast<std::uint64_t>(u));
        user_threshold[static_cast<std::size_t>(u)] = static_cast<std::int32_t>(
            draw < cfg.relaxed->theta ? cfg.relaxed->l1[k] : cfg.relaxed->l2[k]);
      }
    }
  }

  std::vector<std::vector<std::int32_t>> counts(k_count);
  std::vector<std::int32_t> quota_ages;  // scratch: ages with a nonzero quota
  std::vector<std::vector<std::int32_t>> quota(k_count);

  std::uint64_t total_age = 0, burned_age = 0, transmissions = 0;
  std::vector<std::uint64_t> class_age(k_count, 0);
  std::vector<std::int64_t> slot_class_sum(k_count, 0);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::int64_t u = lay.class_offset[k]; u < lay.class_offset[k] + lay.class_count[k]; ++u) {
      slot_class_sum[k] += ages[static_cast<std::size_t>(u)];
    }
  }

  SimMetrics metrics;
  metrics.n_users = n;
  metrics.m_budget = lay.m_budget;
  metrics.horizon = horizon;
  metrics.burn_in_slots = static_cast<std::int64_t>(cfg.burn_in_frac * static_cast<double>(horizon));
  metrics.seed = cfg.seed;
  metrics.policy = policy_name(cfg.policy);
  metrics.rng_algorithm = kRngAlgorithm;
  metrics.min_scheduled_per_slot = n + 1;
  metrics.max_scheduled_per_slot = -1;

  const bool capped = cfg.policy != Policy::kMixedThreshold;

  for (std::int64_t t = 0; t < horizon; ++t) {
    std::int64_t slot_sum = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      slot_sum += slot_class_sum[k];
      class_age[k] += static_cast<std::uint64_t>(slot_class_sum[k]);
    }
    total_age += static_cast<std::uint64_t>(slot_sum);
    if (t >= metrics.burn_in_slots) burned_age += static_cast<std::uint64_t>(slot_sum);

    // Histogram of the current ages (the empirical proportions times N).
    for (std::size_t k = 0; k < k_count; ++k) {
      std::fill(counts[k].begin(), counts[k].end(), 0);
    }
    for (std::size_t k = 0; k < k_count; ++k) {
      for (std::int64_t u = lay.class_offset[k]; u < lay.class_offset[k] + lay.class_count[k];
           ++u) {
        const std::size_t a = static_cast<std::size_t>(ages[static_cast<std::size_t>(u)]);
        if (counts[k].size() < a) counts[k].resize(a, 0);
        ++counts[k][a - 1];
      }
    }

    const bool sampled = (t % cfg.proportion_stride) == 0;
    if (sampled && cfg.fluid_trajectory && static_cast<std::size_t>(t) < cfg.fluid_trajectory->size()) {
      const double dist =
          histogram_distance(counts, static_cast<double>(n), (*cfg.fluid_trajectory)[static_cast<std::size_t>(t)]);
      metrics.norm_to_fluid.emplace_back(t, dist);
      metrics.sup_norm_to_fluid = std::max(metrics.sup_norm_to_fluid, dist);
    }
    if (sampled && cfg.z_star) {
      double dist = histogram_distance(counts, static_cast<double>(n), cfg.z_star->mass);
      for (double tail : cfg.z_star->tail_first_moment) dist += tail;
      metrics.norm_to_zstar.emplace_back(t, dist);
    }
    if (sampled && cfg.record_proportions) {
      std::vector<std::vector<double>> snap(k_count);
      for (std::size_t k = 0; k < k_count; ++k) {
        snap[k].resize(counts[k].size());
        for (std::size_t i = 0; i < counts[k].size(); ++i) {
          snap[k][i] = static_cast<double>(counts[k][i]) / static_cast<double>(n);
        }
      }
      metrics.snapshots.emplace_back(t, std::move(snap));
    }

    // Selection plan: walk the (class, age) cells in priority order and
    // assign per-cell quotas until the budget is spent. Within the boundary
    // cell the lowest user ids go first (the user pass runs in id order).
    if (capped) {
      for (std::size_t k = 0; k < k_count; ++k) {
        if (quota[k].size() < counts[k].size()) quota[k].resize(counts[k].size(), 0);
      }
      std::vector<std::ptrdiff_t> head(k_count);
      for (std::size_t k = 0; k < k_count; ++k) {
        head[k] = static_cast<std::ptrdiff_t>(counts[k].size()) - 1;
        while (head[k] >= 0 && counts[k][static_cast<std::size_t>(head[k])] == 0) --head[k];
      }
      std::int64_t left = lay.m_budget;
      while (left > 0) {
        std::size_t pick = k_count;
        double pick_key = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
          if (head[k] < 0) continue;
          const double key = cfg.policy == Policy::kWhittle
                                 ? whittle_index(cfg.system.cls(k).p, head[k] + 1)
                                 : static_cast<double>(head[k] + 1);
          if (pick == k_count || key > pick_key ||
              (key == pick_key && cfg.system.cls(k).p > cfg.system.cls(pick).p) ||
              (key == pick_key && cfg.system.cls(k).p == cfg.system.cls(pick).p &&
               head[k] < head[pick])) {
            pick = k;
            pick_key = key;
          }
        }
        if (pick == k_count) break;  // unreachable for m < n
        const std::size_t idx = static_cast<std::size_t>(head[pick]);
        const std::int32_t avail = counts[pick][idx];
        const std::int32_t take = static_cast<std::int32_t>(std::min<std::int64_t>(avail, left));
        quota[pick][idx] = take;
        left -= take;
        if (take == avail) {
          --head[pick];
          while (head[pick] >= 0 && counts[pick][static_cast<std::size_t>(head[pick])] == 0)
            --head[pick];
        }
      }
    }

    // User pass: consume quotas in id order, draw the channel for scheduled
    // users, and advance every age.
    std::int64_t scheduled_now = 0;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double p = cfg.system.cls(k).p;
      std::int64_t delta = 0;
      for (std::int64_t u = lay.class_offset[k]; u < lay.class_offset[k] + lay.class_count[k];
           ++u) {
        const std::int32_t a = ages[static_cast<std::size_t>(u)];
        bool scheduled;
        if (capped) {
          std::int32_t& q = quota[k][static_cast<std::size_t>(a - 1)];
          scheduled = q > 0;
          if (scheduled) --q;
        } else {
          scheduled = a >= user_threshold[static_cast<std::size_t>(u)];
        }
        std::int32_t next_age = a + 1;
        if (scheduled) {
          ++scheduled_now;
          const bool success = channel_uniform(cfg.seed, static_cast<std::uint64_t>(t),
                                               static_cast<std::uint64_t>(u)) < p;
          if (success) next_age = 1;
        }
        ages[static_cast<std::size_t>(u)] = next_age;
        delta += next_age - a;
      }
      slot_class_sum[k] += delta;
    }
    transmissions += static_cast<std::uint64_t>(scheduled_now);
    metrics.min_scheduled_per_slot = std::min(metrics.min_scheduled_per_slot, scheduled_now);
    metrics.max_scheduled_per_slot = std::max(metrics.max_scheduled_per_slot, scheduled_now);
  }

  const double nt = static_cast<double>(n) * static_cast<double>(horizon);
  metrics.avg_age_per_user = static_cast<double>(total_age) / nt;
  const std::int64_t kept = horizon - metrics.burn_in_slots;
  metrics.avg_age_per_user_burned =
      static_cast<double>(burned_age) / (static_cast<double>(n) * static_cast<double>(kept));
  metrics.per_class_avg_age.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    metrics.per_class_avg_age[k] = static_cast<double>(class_age[k]) /
                                   (static_cast<double>(lay.class_count[k]) *
                                    static_cast<double>(horizon));
  }
  const double offered = capped ? static_cast<double>(lay.m_budget) * static_cast<double>(horizon)
                                : cfg.system.alpha() * nt;
  metrics.utilization = static_cast<double>(transmissions) / offered;
  return metrics;
}

KurtzTable kurtz_experiment(const SystemConfig& system, const std::vector<std::int64_t>& n_list,
                            std::int64_t horizon, int seeds, std::optional<double> mu,
                            std::uint64_t base_seed, int threads,
                            const std::optional<std::vector<std::vector<double>>>& init) {
  if (n_list.empty()) throw std::invalid_argument("kurtz_experiment: empty n_list");
  if (seeds < 1) throw std::invalid_argument("kurtz_experiment: seeds must be >= 1");

  // Shared fluid path from the same initial state as every run.
  FluidState z0 = FluidState::all_age_one(system);
  if (init) {
    z0.mass = *init;
    z0.lost_mass.assign(system.num_classes(), 0.0);
  }
  FluidRunOptions fopt;
  fopt.audit = false;
  fopt.record_states = true;
  const FluidRunReport fluid = run_fluid(std::move(z0), system, horizon, 1e-12, fopt);

  std::vector<std::vector<double>> sup(n_list.size(), std::vector<double>(static_cast<std::size_t>(seeds)));
  const std::size_t tasks = n_list.size() * static_cast<std::size_t>(seeds);
  detail::parallel_for(tasks, threads, [&](std::size_t task) {
    const std::size_t ni = task / static_cast<std::size_t>(seeds);
    const std::size_t run = task % static_cast<std::size_t>(seeds);
    SimConfig cfg{system};
    cfg.n_users = n_list[ni];
    cfg.horizon = horizon;
    cfg.seed = derive_run_seed(base_seed, static_cast<std::uint64_t>(n_list[ni]),
                               static_cast<std::uint64_t>(run));
    cfg.policy = Policy::kWhittle;
    cfg.require_integral_budget = true;
    cfg.burn_in_frac = 0.0;
    cfg.fluid_trajectory = &fluid.states;
    cfg.initial_proportions = init;
    sup[ni][run] = simulate(cfg).sup_norm_to_fluid;
  });

  KurtzTable table;
  table.horizon = horizon;
  if (mu) {
    table.mu = *mu;
  } else {
    std::size_t largest = 0;
    for (std::size_t i = 1; i < n_list.size(); ++i) {
      if (n_list[i] > n_list[largest]) largest = i;
    }
    std::vector<double> sorted = sup[largest];
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    const double median =
        sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    table.mu = 2.0 * median;
    table.mu_was_auto = true;
  }
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    KurtzRow row;
    row.n = n_list[ni];
    row.seeds = seeds;
    std::vector<double> sorted = sup[ni];
    std::sort(sorted.begin(), sorted.end());
    const std::size_t h = sorted.size() / 2;
    row.median_sup = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
    row.max_sup = sorted.back();
    int exceed = 0;
    for (double s : sup[ni]) {
      if (s >= table.mu) ++exceed;
    }
    row.exceed_prob = static_cast<double>(exceed) / static_cast<double>(seeds);
    row.n_times_prob = static_cast<double>(row.n) * row.exceed_prob;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace aoisched
