#include "aoisched/policy_core.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace aoisched {

namespace {

void check_p_positive(double p, const char* who) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(who) + ": p must be in (0, 1], got " +
                                std::to_string(p));
  }
}

void check_threshold(int n, const char* who) {
  if (n < 1) {
    throw std::invalid_argument(std::string(who) + ": threshold must be >= 1, got " +
                                std::to_string(n));
  }
}

}  // namespace

double whittle_index(double p, std::int64_t age) {
  if (age < 1) {
    throw std::invalid_argument("whittle_index: age must be >= 1, got " + std::to_string(age));
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("whittle_index: p must be in [0, 1]");
  }
  // (age-1)*age is even, so the triangular term is an exact integer.
  const double tri = 0.5 * static_cast<double>(age - 1) * static_cast<double>(age);
  return p * tri + static_cast<double>(age);
}

double ThresholdDistribution::mean_age() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    sum += static_cast<double>(i + 1) * probs[i];
  }
  return sum + tail_mass * (static_cast<double>(probs.size()) + 1.0 / p);
}

int default_max_state(double p, int threshold, double tail_eps) {
  check_p_positive(p, "default_max_state");
  check_threshold(threshold, "default_max_state");
  if (p == 1.0) return threshold;
  // tail_mass(m) = (1-p)^(m+1-n) / (np+1-p); pick the smallest m making it < tail_eps.
  const double denom = (threshold - 1) * p + 1.0;
  const int extra =
      static_cast<int>(std::ceil(std::log(tail_eps * denom) / std::log1p(-p)));
  return threshold + std::max(0, extra - 1);
}

ThresholdDistribution stationary_distribution(double p, int threshold, int max_state) {
  check_p_positive(p, "stationary_distribution");
  check_threshold(threshold, "stationary_distribution");
  if (max_state < threshold) {
    throw std::invalid_argument("stationary_distribution: max_state must be >= threshold");
  }
  ThresholdDistribution d;
  d.p = p;
  d.threshold = threshold;
  d.probs.resize(static_cast<std::size_t>(max_state));
  const double base = p / ((threshold - 1) * p + 1.0);
  for (int i = 1; i <= threshold; ++i) {
    d.probs[static_cast<std::size_t>(i - 1)] = base;
  }
  double v = base;
  for (int i = threshold + 1; i <= max_state; ++i) {
    v *= (1.0 - p);
    d.probs[static_cast<std::size_t>(i - 1)] = v;
  }
  d.tail_mass =
      std::pow(1.0 - p, static_cast<double>(max_state + 1 - threshold)) * base / p;
  return d;
}

double active_fraction(double p, int threshold) {
  check_p_positive(p, "active_fraction");
  check_threshold(threshold, "active_fraction");
  return 1.0 / ((threshold - 1) * p + 1.0);
}

double threshold_average_cost(double p, int threshold, double lambda) {
  check_p_positive(p, "threshold_average_cost");
  check_threshold(threshold, "threshold_average_cost");
  if (lambda < 0.0) {
    throw std::invalid_argument("threshold_average_cost: lambda must be >= 0");
  }
  const double m = static_cast<double>(threshold - 1);
  const double mean_age = ((m * m + m) * p * p + 2.0 * p * m + 2.0) / (2.0 * p * (m * p + 1.0));
  return mean_age + lambda / ((threshold - 1) * p + 1.0);
}

std::vector<double> dtmc_stationary_oracle(double p, int threshold, int max_state,
                                           int max_iters, double tol) {
  check_p_positive(p, "dtmc_stationary_oracle");
  check_threshold(threshold, "dtmc_stationary_oracle");
  if (max_state < threshold) {
    throw std::invalid_argument("dtmc_stationary_oracle: max_state must be >= threshold");
  }
  const std::size_t m = static_cast<std::size_t>(max_state);
  std::vector<double> v(m, 1.0 / static_cast<double>(m));
  std::vector<double> next(m, 0.0);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    double to_one = 0.0;
    for (std::size_t idx = 0; idx < m; ++idx) {
      const int state = static_cast<int>(idx) + 1;
      if (state < threshold) {
        next[idx + 1] += v[idx];  // idle: age grows by one
      } else {
        to_one += p * v[idx];  // scheduled: reset on success
        if (idx + 1 < m) {
          next[idx + 1] += (1.0 - p) * v[idx];
        } else {
          next[idx] += (1.0 - p) * v[idx];  // truncation: failure mass stays on top
        }
      }
    }
    next[0] += to_one;
    // Lazy half-step: same stationary vector, but no periodic oscillation
    // (the p = 1 chain is a pure cycle).
    double diff = 0.0;
    for (std::size_t idx = 0; idx < m; ++idx) {
      next[idx] = 0.5 * next[idx] + 0.5 * v[idx];
      diff += std::abs(next[idx] - v[idx]);
    }
    v.swap(next);
    if (diff < tol) return v;
  }
  throw std::runtime_error("dtmc_stationary_oracle: power iteration did not converge in " +
                           std::to_string(max_iters) + " iterations");
}

}  // namespace aoisched
