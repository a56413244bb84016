#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aoisched/relaxed_solver.hpp"
#include "aoisched/system.hpp"

namespace aoisched {

// Expected per-class age proportions z_i^k(t). Support grows by at most one
// state per step; negligible tail bins are dropped into lost_mass so that
// sum(mass[k]) + lost_mass[k] stays equal to the class share.
struct FluidState {
  std::vector<std::vector<double>> mass;  // mass[k][i-1] for age i
  std::int64_t t = 0;
  double truncation_eps = 1e-15;
  std::vector<double> lost_mass;

  static FluidState all_age_one(const SystemConfig& config);
  static FluidState from_fixed_point(const SystemConfig& config, const FixedPointVector& z);
  static FluidState random(const SystemConfig& config, std::uint64_t seed);

  double class_mass(std::size_t k) const;
};

// Outcome of one scheduling round: per-class scheduled fractions, the
// instantaneous thresholds, and the idle share of each boundary bin.
// threshold[k] is the highest age of class k holding idle mass (0 when the
// class is fully scheduled); idle_share[k] is the idle fraction of that bin,
// in (0, 1], and at most one class has a share below 1.
struct ScheduleDecision {
  std::vector<double> alpha_k;
  std::vector<int> threshold;
  std::vector<double> idle_share;

  double beta() const { return idle_share[0]; }
  double gamma() const { return idle_share[1]; }
};

// One round of the expectation dynamics: fills the budget from the highest
// index values down (ties: larger p first, then lower age), then moves
// p_k * (scheduled mass) to age 1 and everything else up by one age.
// Advances z in place and returns the decision taken.
ScheduleDecision fluid_step(FluidState& z, const SystemConfig& config);

// D = ((p1+p2)/2 + sqrt(2(p1-p2) + (p1+p2)^2/4)) / (p1 - p2), for p1 > p2.
double compute_D(double p1, double p2);

// Budget threshold of the sufficient condition: B_alpha = 1/(1 + (D-2) p2).
double assumption_bound(double p1, double p2);

// The unique integer in [(1-alpha)/(p2*alpha), (1-alpha)/(p2*alpha) + 1);
// uniform bound on the instantaneous thresholds after burn-in.
int t_max(double alpha, double p2);

// Checks the interleaving w2(n) < w1(n) < w2(n+1) for n in [1, n_max].
// The equality w1(1) == w2(1) == 1 is reported apart as a known boundary
// case and does not count as a failure.
struct AlternationReport {
  bool ok = false;
  int first_failure = -1;  // smallest n where the strict order breaks; -1 if none
  bool age1_tie = true;
};
AlternationReport check_alternation(double p1, double p2, int n_max);

// Age-weighted L1: sum over classes and ages of |v_i^k| * i.
double weighted_norm(const std::vector<std::vector<double>>& v);

// ||z - z*|| in the weighted norm; the fixed point's analytic tail first
// moment is added for the region beyond its truncation.
double weighted_distance(const FluidState& z, const FixedPointVector& z_star);

struct ConvergenceCertificate {
  double d_value = 0.0;
  double b_alpha = 0.0;
  bool assumption_ok = false;   // alpha > b_alpha
  int t_max = 0;
  bool alternation_ok = false;  // strict interleaving up to t_max + 1 (age-1 tie aside)
};
// Two-class configs only (requires p1 > p2 strictly).
ConvergenceCertificate make_certificate(const SystemConfig& config);

// Ring buffer of the last few per-class scheduled fractions, wide enough to
// reconstruct A_k(T) = (alpha_k(T), ..., alpha_k(T - l(T))) for l(T) <= t_max.
class AlphaHistory {
 public:
  explicit AlphaHistory(std::size_t capacity);
  void push(double a1, double a2);
  std::int64_t latest_slot() const { return latest_; }
  bool has(std::int64_t slot) const;
  double alpha(std::size_t k, std::int64_t slot) const;

 private:
  std::vector<double> a1_, a2_;
  std::int64_t latest_ = -1;
};

struct AuditViolation {
  std::int64_t slot = 0;
  std::string what;
};

struct AuditReport {
  bool assertions_enabled = false;  // false: observation-only run
  std::int64_t t_f = -1;            // first slot with alpha_1 > 0
  std::int64_t t0 = -1;             // first slot where every idle bin is an alpha image
  std::int64_t slots_audited = 0;
  std::int64_t violation_count = 0;
  std::vector<AuditViolation> violations;  // first few, for diagnostics
  std::int64_t case_counts[5] = {0, 0, 0, 0, 0};  // bracketing cases 1..4, [4] = none
  double final_a1_spread = 0.0;  // max A_1 - min A_1 at the last audited slot
  int max_threshold_seen = 0;    // over the audited window
};

// Per-slot witness of the burn-in structure and contraction behaviour of the
// scheduled fractions: threshold bounds, the four bracketing cases for
// alpha_1(T+1), monotonicity of max/min A_1(T), and positivity after t_f.
// Violations are only counted when assertions are enabled (two classes with
// the budget above assumption_bound); otherwise the audit just observes.
class MonotonicityAudit {
 public:
  MonotonicityAudit(const SystemConfig& config, const ConvergenceCertificate& cert);
  void observe(const FluidState& before, const ScheduleDecision& decision);
  AuditReport finish();

 private:
  void violation(std::int64_t slot, std::string what);

  const SystemConfig& config_;
  ConvergenceCertificate cert_;
  AuditReport report_;
  AlphaHistory history_;
  std::int64_t slot_ = 0;
  double tol_ = 1e-10;
  bool have_prev_ = false;
  double prev_max_ = 0.0, prev_min_ = 0.0;
  int prev_l_ = 0;
};

struct FluidRunOptions {
  bool audit = true;
  bool record_decisions = false;
  bool record_states = false;
};

struct FluidRunReport {
  std::vector<double> distance;     // ||z(t) - z*|| for t = 0..horizon-1
  std::int64_t converged_at = -1;   // first slot with distance < tol
  std::int64_t monotone_from = -1;  // distance nonincreasing from this slot on
  std::optional<ConvergenceCertificate> certificate;  // two-class configs only
  AuditReport audit;
  FluidState final_state;
  std::vector<ScheduleDecision> decisions;             // when record_decisions
  std::vector<std::vector<std::vector<double>>> states;  // when record_states
};

// Iterates fluid_step for `horizon` slots against the fixed point of the
// config. Non-convergence is a reported status, not an error.
FluidRunReport run_fluid(FluidState z0, const SystemConfig& config, std::int64_t horizon,
                         double tol, const FluidRunOptions& options = {});

}  // namespace aoisched
