#pragma once

#include <cstdint>
#include <vector>

#include "aoisched/system.hpp"

namespace aoisched {

// Priority index of a user with success probability p at age i:
//   W(i) = (i-1) * p * i / 2 + i.
// Strictly increasing in i, nondecreasing in p, and W(1) = 1 for every p.
double whittle_index(double p, std::int64_t age);

// Stationary age distribution of the fixed-threshold chain (transmit exactly
// when age >= threshold), truncated at max_state with the geometric remainder
// carried analytically so that sum(probs) + tail_mass == 1.
struct ThresholdDistribution {
  double p = 0.0;
  int threshold = 0;
  std::vector<double> probs;  // probs[i-1] = u(i) for i = 1..max_state
  double tail_mass = 0.0;     // closed-form mass beyond max_state

  int max_state() const { return static_cast<int>(probs.size()); }
  // First moment: truncated sum plus the analytic tail correction
  // tail_mass * (max_state + 1/p), the conditional mean age of the tail.
  double mean_age() const;
};

// Smallest truncation point whose tail mass stays below tail_eps.
int default_max_state(double p, int threshold, double tail_eps = 1e-14);

// u(i) = p/(np+1-p) for i <= n, decaying by (1-p) per state beyond n.
// Rejects p == 0 (the age diverges; no stationary regime exists).
ThresholdDistribution stationary_distribution(double p, int threshold, int max_state);

// Stationary probability of being at or above the threshold: 1/(np+1-p).
double active_fraction(double p, int threshold);

// Long-run average of age + lambda * 1{scheduled} under threshold n:
//   [((n-1)^2 + (n-1)) p^2 + 2p(n-1) + 2] / (2p((n-1)p + 1)) + lambda/(np+1-p)
double threshold_average_cost(double p, int threshold, double lambda);

// Independent check on the closed forms above: power iteration on the
// explicit transition matrix of the threshold chain, truncated at max_state
// (the top state keeps its failure mass). Choose max_state so that
// (1-p)^(max_state-threshold) is negligible. Throws if the iteration does
// not settle within max_iters.
std::vector<double> dtmc_stationary_oracle(double p, int threshold, int max_state,
                                           int max_iters = 200000, double tol = 1e-15);

}  // namespace aoisched
