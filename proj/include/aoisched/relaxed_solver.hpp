#pragma once

#include <vector>

#include "aoisched/policy_core.hpp"
#include "aoisched/system.hpp"

namespace aoisched {

// Stationary per-class age proportions of the relaxed optimum, truncated with
// analytic remainders. mass[k] sums (with tail_mass[k]) to the class share.
struct FixedPointVector {
  std::vector<std::vector<double>> mass;     // mass[k][i-1] for age i
  std::vector<double> tail_mass;             // per class, beyond the truncation
  std::vector<double> tail_first_moment;     // per class, sum of i * mass over the tail
};

// Optimal solution of the time-averaged (relaxed) scheduling problem: a
// theta-mix of two adjacent threshold vectors meeting the budget exactly.
struct RelaxedSolution {
  std::vector<ClassSpec> classes;  // copy of the system the solution belongs to
  double alpha = 0.0;

  double w_star = 0.0;       // critical index value
  std::vector<int> l1;       // upper threshold per class
  std::vector<int> l2;       // lower threshold per class; l2[k] <= l1[k] <= l2[k] + 1
  double theta = 1.0;        // weight on the l1 thresholds, in (0, 1]
  int critical_class = -1;   // class whose thresholds differ; -1 when theta == 1
  double f1 = 0.0, f2 = 0.0; // aggregate active fractions bracketing alpha (f1 <= alpha <= f2)
  double c_rp = 0.0;         // optimal per-user average age
  FixedPointVector z_star;
};

// Walks the merged ascending sequence of index values, raising one class
// threshold at a time, until the aggregate active fraction crosses alpha;
// the mixing weight follows in closed form. Index ties across classes are
// resolved so that the class with the larger p keeps scheduling priority
// (its threshold is raised later), matching the fluid/simulator tie-break.
RelaxedSolution solve_relaxed(const SystemConfig& config);

// Per-user average age of the solution, evaluated from the truncated z*
// vector plus its analytic tail first moments. Agrees with the closed-form
// c_rp stored by solve_relaxed to ~1e-10.
double relaxed_cost(const RelaxedSolution& solution);

// Just the stationary proportion vector z*.
FixedPointVector fixed_point(const SystemConfig& config);

}  // namespace aoisched
