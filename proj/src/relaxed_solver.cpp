#include "aoisched/relaxed_solver.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace aoisched {

namespace {

// Tail of the first moment beyond max_state m: tail_mass(m) * (m + 1/p).
double tail_mass_at(double p, int threshold, int m) {
  const double base = p / ((threshold - 1) * p + 1.0);
  return std::pow(1.0 - p, static_cast<double>(m + 1 - threshold)) * base / p;
}

// Smallest truncation point where the mixed tail first moment drops below eps.
int mixed_truncation(double p, int n1, int n2, double theta, double eps) {
  int m = std::max(n1, n2);
  for (;;) {
    const double moment = (theta * tail_mass_at(p, n1, m) +
                           (1.0 - theta) * tail_mass_at(p, n2, m)) *
                          (static_cast<double>(m) + 1.0 / p);
    if (moment < eps || p == 1.0) return m;
    ++m;
    if (m > 100000000) {
      throw std::runtime_error("mixed_truncation: truncation point ran away");
    }
  }
}

FixedPointVector materialize_z_star(const RelaxedSolution& sol, double moment_eps) {
  FixedPointVector z;
  const std::size_t k_count = sol.classes.size();
  z.mass.resize(k_count);
  z.tail_mass.resize(k_count);
  z.tail_first_moment.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double p = sol.classes[k].p;
    const double share = sol.classes[k].share;
    const int m = mixed_truncation(p, sol.l1[k], sol.l2[k], sol.theta, moment_eps);
    const ThresholdDistribution u1 = stationary_distribution(p, sol.l1[k], m);
    const ThresholdDistribution u2 = stationary_distribution(p, sol.l2[k], m);
    z.mass[k].resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      z.mass[k][static_cast<std::size_t>(i)] =
          share * (sol.theta * u1.probs[static_cast<std::size_t>(i)] +
                   (1.0 - sol.theta) * u2.probs[static_cast<std::size_t>(i)]);
    }
    const double tail = sol.theta * u1.tail_mass + (1.0 - sol.theta) * u2.tail_mass;
    z.tail_mass[k] = share * tail;
    z.tail_first_moment[k] = share * tail * (static_cast<double>(m) + 1.0 / p);
  }
  return z;
}

}  // namespace

RelaxedSolution solve_relaxed(const SystemConfig& config) {
  const std::size_t k_count = config.num_classes();
  RelaxedSolution sol;
  sol.classes = config.classes();
  sol.alpha = config.alpha();

  // Thresholds all at 1: everyone is always active, aggregate fraction 1.
  std::vector<int> l(k_count, 1);
  std::vector<std::int64_t> next_state(k_count, 1);
  double f = 1.0;

  auto aggregate_fraction = [&](const std::vector<int>& thresholds) {
    double s = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      s += config.cls(k).share * active_fraction(config.cls(k).p, thresholds[k]);
    }
    return s;
  };

  const double alpha = config.alpha();
  for (std::int64_t guard = 0;; ++guard) {
    if (guard > 100000000) {
      throw std::runtime_error("solve_relaxed: bracket scan did not terminate");
    }
    // Next candidate: the smallest unprocessed index value. On a tie the
    // smaller-p class is idled first so the larger-p class keeps priority.
    std::size_t pick = 0;
    double best_w = 0.0;
    bool have = false;
    for (std::size_t k = 0; k < k_count; ++k) {
      const double w = whittle_index(config.cls(k).p, next_state[k]);
      if (!have || w < best_w ||
          (w == best_w && config.cls(k).p <= config.cls(pick).p)) {
        have = true;
        best_w = w;
        pick = k;
      }
    }
    const std::vector<int> prev_l = l;
    const double prev_f = f;
    l[pick] = static_cast<int>(next_state[pick]) + 1;
    ++next_state[pick];
    f = aggregate_fraction(l);

    if (f == alpha) {
      // The budget lands exactly on an achievable fraction: no mixing needed,
      // and of the two equivalent critical values we keep the smaller one.
      sol.w_star = best_w;
      sol.l1 = l;
      sol.l2 = l;
      sol.theta = 1.0;
      sol.critical_class = -1;
      sol.f1 = f;
      sol.f2 = f;
      break;
    }
    if (f < alpha) {
      sol.w_star = best_w;
      sol.l1 = l;
      sol.l2 = prev_l;
      sol.f1 = f;
      sol.f2 = prev_f;
      sol.theta = (alpha - sol.f2) / (sol.f1 - sol.f2);
      sol.critical_class = static_cast<int>(pick);
      break;
    }
  }

  double cost = 0.0;
  for (std::size_t k = 0; k < k_count; ++k) {
    const ClassSpec& c = config.cls(k);
    cost += c.share * (sol.theta * threshold_average_cost(c.p, sol.l1[k], 0.0) +
                       (1.0 - sol.theta) * threshold_average_cost(c.p, sol.l2[k], 0.0));
  }
  sol.c_rp = cost;
  sol.z_star = materialize_z_star(sol, 1e-14);
  return sol;
}

double relaxed_cost(const RelaxedSolution& solution) {
  double cost = 0.0;
  for (std::size_t k = 0; k < solution.z_star.mass.size(); ++k) {
    double s = 0.0;
    const std::vector<double>& m = solution.z_star.mass[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      s += static_cast<double>(i + 1) * m[i];
    }
    cost += s + solution.z_star.tail_first_moment[k];
  }
  return cost;
}

FixedPointVector fixed_point(const SystemConfig& config) {
  return solve_relaxed(config).z_star;
}

}  // namespace aoisched
