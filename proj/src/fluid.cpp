#include "aoisched/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "aoisched/policy_core.hpp"

namespace aoisched {

FluidState FluidState::all_age_one(const SystemConfig& config) {
  FluidState z;
  z.mass.resize(config.num_classes());
  z.lost_mass.assign(config.num_classes(), 0.0);
  for (std::size_t k = 0; k < config.num_classes(); ++k) {
    z.mass[k] = {config.cls(k).share};
  }
  return z;
}

FluidState FluidState::from_fixed_point(const SystemConfig& config, const FixedPointVector& zs) {
  FluidState z;
  z.mass = zs.mass;
  // The truncated remainder is carried as already-lost mass so the per-class
  // accounting stays exact.
  z.lost_mass = zs.tail_mass;
  if (z.mass.size() != config.num_classes()) {
    throw std::invalid_argument("from_fixed_point: class count mismatch");
  }
  return z;
}

FluidState FluidState::random(const SystemConfig& config, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.01, 1.0);
  FluidState z;
  z.mass.resize(config.num_classes());
  z.lost_mass.assign(config.num_classes(), 0.0);
  for (std::size_t k = 0; k < config.num_classes(); ++k) {
    const std::size_t support = 1 + static_cast<std::size_t>(gen() % 12);
    std::vector<double> w(support);
    double total = 0.0;
    for (double& x : w) {
      x = unif(gen);
      total += x;
    }
    z.mass[k].resize(support);
    for (std::size_t i = 0; i < support; ++i) {
      z.mass[k][i] = config.cls(k).share * (w[i] / total);
    }
  }
  return z;
}

double FluidState::class_mass(std::size_t k) const {
  double s = 0.0;
  for (double v : mass[k]) s += v;
  return s;
}

ScheduleDecision fluid_step(FluidState& z, const SystemConfig& config) {
  const std::size_t k_count = config.num_classes();
  if (z.mass.size() != k_count) {
    throw std::invalid_argument("fluid_step: state does not match the config");
  }
  if (z.lost_mass.size() != k_count) z.lost_mass.assign(k_count, 0.0);

  for (std::size_t k = 0; k < k_count; ++k) {
    for (double v : z.mass[k]) {
      if (std::isnan(v) || v < 0.0) {
        throw std::runtime_error("fluid_step: negative or NaN mass at slot " +
                                 std::to_string(z.t));
      }
    }
  }

  // Fill the budget from the highest index down. Per class the bins are
  // already index-sorted (the index grows with age), so a K-way merge over
  // per-class cursors gives the global descending order. Ties take the
  // larger p first, then the lower age, then the lower class id.
  std::vector<std::ptrdiff_t> cursor(k_count);
  std::vector<std::vector<double>> sched(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    sched[k].assign(z.mass[k].size(), 0.0);
    cursor[k] = static_cast<std::ptrdiff_t>(z.mass[k].size()) - 1;
    while (cursor[k] >= 0 && z.mass[k][static_cast<std::size_t>(cursor[k])] == 0.0) --cursor[k];
  }

  ScheduleDecision d;
  d.alpha_k.assign(k_count, 0.0);
  d.threshold.assign(k_count, 0);
  d.idle_share.assign(k_count, 1.0);

  double budget = config.alpha();
  while (budget > 0.0) {
    std::size_t pick = k_count;
    double pick_w = -1.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      if (cursor[k] < 0) continue;
      const double w = whittle_index(config.cls(k).p, cursor[k] + 1);
      if (pick == k_count || w > pick_w ||
          (w == pick_w && config.cls(k).p > config.cls(pick).p) ||
          (w == pick_w && config.cls(k).p == config.cls(pick).p &&
           cursor[k] < cursor[pick])) {
        pick = k;
        pick_w = w;
      }
    }
    if (pick == k_count) {
      throw std::runtime_error("fluid_step: budget exceeds the available mass");
    }
    const std::size_t idx = static_cast<std::size_t>(cursor[pick]);
    const double m = z.mass[pick][idx];
    if (m <= budget) {
      sched[pick][idx] = m;
      d.alpha_k[pick] += m;
      budget -= m;
      --cursor[pick];
      while (cursor[pick] >= 0 && z.mass[pick][static_cast<std::size_t>(cursor[pick])] == 0.0)
        --cursor[pick];
    } else {
      sched[pick][idx] = budget;
      d.alpha_k[pick] += budget;
      budget = 0.0;
    }
  }

  // Instantaneous threshold: the highest age of the class still holding idle
  // mass, and the idle share of that bin (exactly 1 when it is fully idle).
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(z.mass[k].size()) - 1; i >= 0; --i) {
      const double idle = z.mass[k][static_cast<std::size_t>(i)] -
                          sched[k][static_cast<std::size_t>(i)];
      if (idle > 0.0) {
        d.threshold[k] = static_cast<int>(i) + 1;
        d.idle_share[k] = idle / z.mass[k][static_cast<std::size_t>(i)];
        break;
      }
    }
  }

  // Expectation dynamics: scheduled mass resets with probability p, and
  // everything else ages by one slot.
  for (std::size_t k = 0; k < k_count; ++k) {
    const double p = config.cls(k).p;
    const std::size_t n = z.mass[k].size();
    std::vector<double> next(n + 1, 0.0);
    next[0] = p * d.alpha_k[k];
    for (std::size_t i = 0; i < n; ++i) {
      next[i + 1] = (z.mass[k][i] - sched[k][i]) + (1.0 - p) * sched[k][i];
    }
    z.mass[k].swap(next);
  }

  // Drop negligible tail bins, but never below the truncation guard so that
  // a dropped bin can never have altered a scheduling decision.
  int max_threshold = 1;
  for (std::size_t k = 0; k < k_count; ++k) max_threshold = std::max(max_threshold, d.threshold[k]);
  const std::size_t guard =
      static_cast<std::size_t>(max_threshold + t_max(config.alpha(), config.min_p()));
  for (std::size_t k = 0; k < k_count; ++k) {
    while (z.mass[k].size() > guard && z.mass[k].back() < z.truncation_eps) {
      z.lost_mass[k] += z.mass[k].back();
      z.mass[k].pop_back();
    }
  }

  z.t += 1;
  return d;
}

double compute_D(double p1, double p2) {
  if (!(p1 > p2 && p2 > 0.0 && p1 <= 1.0)) {
    throw std::invalid_argument("compute_D: need 1 >= p1 > p2 > 0");
  }
  const double half_sum = 0.5 * (p1 + p2);
  return (half_sum + std::sqrt(2.0 * (p1 - p2) + half_sum * half_sum)) / (p1 - p2);
}

double assumption_bound(double p1, double p2) {
  return 1.0 / (1.0 + (compute_D(p1, p2) - 2.0) * p2);
}

int t_max(double alpha, double p2) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("t_max: alpha must be in (0, 1)");
  }
  if (!(p2 > 0.0 && p2 <= 1.0)) {
    throw std::invalid_argument("t_max: p2 must be in (0, 1]");
  }
  const double lb = (1.0 - alpha) / (p2 * alpha);
  // Unique integer in [lb, lb + 1); the slack keeps an exact-integer bound
  // from ceiling up on rounding noise.
  const int value = static_cast<int>(std::ceil(lb - 1e-9));
  return std::max(1, value);
}

AlternationReport check_alternation(double p1, double p2, int n_max) {
  if (!(p1 > p2)) {
    throw std::invalid_argument("check_alternation: need p1 > p2");
  }
  if (n_max < 1) {
    throw std::invalid_argument("check_alternation: n_max must be >= 1");
  }
  AlternationReport r;
  r.age1_tie = true;  // w1(1) == w2(1) == 1 identically
  r.first_failure = -1;
  for (int n = 1; n <= n_max; ++n) {
    const double w1n = whittle_index(p1, n);
    const double w2n = whittle_index(p2, n);
    const double w2next = whittle_index(p2, n + 1);
    const bool lower_ok = (n == 1) ? true : (w2n < w1n);
    const bool upper_ok = w1n < w2next;
    if (!lower_ok || !upper_ok) {
      r.first_failure = n;
      break;
    }
  }
  r.ok = (r.first_failure == -1);
  return r;
}

double weighted_norm(const std::vector<std::vector<double>>& v) {
  double s = 0.0;
  for (const std::vector<double>& cls : v) {
    for (std::size_t i = 0; i < cls.size(); ++i) {
      s += static_cast<double>(i + 1) * std::abs(cls[i]);
    }
  }
  return s;
}

double weighted_distance(const FluidState& z, const FixedPointVector& z_star) {
  double s = 0.0;
  for (std::size_t k = 0; k < z.mass.size(); ++k) {
    const std::vector<double>& a = z.mass[k];
    const std::vector<double>& b = z_star.mass[k];
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      const double av = i < a.size() ? a[i] : 0.0;
      const double bv = i < b.size() ? b[i] : 0.0;
      s += static_cast<double>(i + 1) * std::abs(av - bv);
    }
    s += z_star.tail_first_moment[k];
  }
  return s;
}

ConvergenceCertificate make_certificate(const SystemConfig& config) {
  if (config.num_classes() != 2) {
    throw std::invalid_argument("make_certificate: convergence diagnostics need two classes");
  }
  const double p1 = config.cls(0).p;
  const double p2 = config.cls(1).p;
  if (!(p1 > p2)) {
    throw std::invalid_argument("make_certificate: need p1 > p2 strictly");
  }
  ConvergenceCertificate cert;
  cert.d_value = compute_D(p1, p2);
  cert.b_alpha = assumption_bound(p1, p2);
  cert.assumption_ok = config.alpha() > cert.b_alpha;
  cert.t_max = t_max(config.alpha(), p2);
  cert.alternation_ok = check_alternation(p1, p2, cert.t_max + 1).ok;
  return cert;
}

AlphaHistory::AlphaHistory(std::size_t capacity)
    : a1_(std::max<std::size_t>(capacity, 1), 0.0),
      a2_(std::max<std::size_t>(capacity, 1), 0.0) {}

void AlphaHistory::push(double a1, double a2) {
  ++latest_;
  const std::size_t idx = static_cast<std::size_t>(latest_) % a1_.size();
  a1_[idx] = a1;
  a2_[idx] = a2;
}

bool AlphaHistory::has(std::int64_t slot) const {
  return slot >= 0 && slot <= latest_ &&
         latest_ - slot < static_cast<std::int64_t>(a1_.size());
}

double AlphaHistory::alpha(std::size_t k, std::int64_t slot) const {
  if (!has(slot)) {
    throw std::out_of_range("AlphaHistory: slot outside the retained window");
  }
  const std::size_t idx = static_cast<std::size_t>(slot) % a1_.size();
  return k == 0 ? a1_[idx] : a2_[idx];
}

MonotonicityAudit::MonotonicityAudit(const SystemConfig& config,
                                     const ConvergenceCertificate& cert)
    : config_(config),
      cert_(cert),
      history_(static_cast<std::size_t>(cert.t_max) + 3) {
  report_.assertions_enabled = cert.assumption_ok && cert.alternation_ok;
}

void MonotonicityAudit::violation(std::int64_t slot, std::string what) {
  if (!report_.assertions_enabled) return;
  ++report_.violation_count;
  if (report_.violations.size() < 32) {
    report_.violations.push_back({slot, std::move(what)});
  }
}

void MonotonicityAudit::observe(const FluidState& before, const ScheduleDecision& d) {
  const std::int64_t t = slot_++;
  history_.push(d.alpha_k[0], d.alpha_k[1]);
  const double a1 = d.alpha_k[0];

  if (report_.t_f < 0 && a1 > 0.0) report_.t_f = t;
  if (report_.t_f >= 0 && t > report_.t_f && !(a1 > 0.0)) {
    violation(t, "alpha_1 fell back to zero after activation");
  }

  const int l1 = d.threshold[0];
  const int l2 = d.threshold[1];

  if (report_.t0 < 0 && report_.t_f >= 0) {
    // Burn-in detection: thresholds inside the bound and every idle bin equal
    // to the alpha image p_k * alpha_k(t - i) recorded i slots ago.
    bool ok = l1 >= 1 && l2 >= 1 && l2 - l1 >= 0 && l2 - l1 <= 1 && l2 <= cert_.t_max;
    for (std::size_t k = 0; ok && k < 2; ++k) {
      const double p = config_.cls(k).p;
      for (int i = 1; ok && i <= d.threshold[k]; ++i) {
        if (!history_.has(t - i)) {
          ok = false;
          break;
        }
        const double image = p * history_.alpha(k, t - i);
        if (std::abs(before.mass[k][static_cast<std::size_t>(i - 1)] - image) > tol_) {
          ok = false;
        }
      }
    }
    if (ok) report_.t0 = t;
  }

  if (report_.t0 < 0 || t < report_.t0) return;
  ++report_.slots_audited;
  report_.max_threshold_seen = std::max(report_.max_threshold_seen, std::max(l1, l2));

  if (l1 < 1 || l2 - l1 < 0 || l2 - l1 > 1) {
    violation(t, "thresholds lost the l1 <= l2 <= l1+1 structure (l1=" + std::to_string(l1) +
                     ", l2=" + std::to_string(l2) + ")");
  }
  if (l2 > cert_.t_max) {
    violation(t, "instantaneous threshold " + std::to_string(l2) + " above t_max " +
                     std::to_string(cert_.t_max));
  }
  if (l1 == l2 && d.idle_share[1] != 1.0) {
    violation(t, "equal thresholds but the class-2 boundary bin is split");
  }
  if (l2 == l1 + 1 && d.idle_share[0] != 1.0) {
    violation(t, "staggered thresholds but the class-1 boundary bin is split");
  }

  const int l = std::min(l2, cert_.t_max);
  double cur_max = -std::numeric_limits<double>::infinity();
  double cur_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= l; ++j) {
    if (!history_.has(t - j)) break;
    const double v = history_.alpha(0, t - j);
    cur_max = std::max(cur_max, v);
    cur_min = std::min(cur_min, v);
  }

  if (have_prev_) {
    if (l2 > prev_l_ + 1) {
      violation(t, "threshold window grew by more than one slot");
    }
    if (cur_max > prev_max_ + tol_) {
      violation(t, "max A_1 increased");
    }
    if (cur_min < prev_min_ - tol_) {
      violation(t, "min A_1 decreased");
    }
    // Bracketing of alpha_1(T+1) by elements of A_1(T), with the contraction
    // factor p1 on the matching side.
    const double p1 = config_.cls(0).p;
    const std::int64_t tp = t - 1;
    if (history_.has(tp - prev_l_)) {
      const double x = a1;
      const double a_t = history_.alpha(0, tp);
      const double a_lo = history_.alpha(0, tp - prev_l_);
      const double a_lo1 = history_.alpha(0, tp - prev_l_ + 1);
      int matched = -1;
      if (a_t <= x + tol_ && x <= a_lo + tol_ && x - a_t <= p1 * (a_lo - a_t) + tol_) {
        matched = 0;
      } else if (a_lo <= x + tol_ && x <= a_t + tol_ && a_t - x <= p1 * (a_t - a_lo) + tol_) {
        matched = 1;
      } else if (a_lo1 <= x + tol_ && x <= a_t + tol_ && a_t - x <= p1 * (a_t - a_lo1) + tol_) {
        matched = 2;
      } else if (a_t <= x + tol_ && x <= a_lo1 + tol_ && x - a_t <= p1 * (a_lo1 - a_t) + tol_) {
        matched = 3;
      }
      if (matched >= 0) {
        ++report_.case_counts[matched];
      } else {
        ++report_.case_counts[4];
        violation(t, "alpha_1 outside all four bracketing cases");
      }
    }
  }

  prev_max_ = cur_max;
  prev_min_ = cur_min;
  prev_l_ = l;
  have_prev_ = true;
  report_.final_a1_spread = cur_max - cur_min;
}

AuditReport MonotonicityAudit::finish() { return report_; }

FluidRunReport run_fluid(FluidState z0, const SystemConfig& config, std::int64_t horizon,
                         double tol, const FluidRunOptions& options) {
  if (horizon < 1) {
    throw std::invalid_argument("run_fluid: horizon must be >= 1");
  }
  FluidRunReport report;
  const FixedPointVector z_star = fixed_point(config);

  std::optional<MonotonicityAudit> audit;
  if (config.num_classes() == 2 && config.cls(0).p > config.cls(1).p) {
    report.certificate = make_certificate(config);
    if (options.audit) audit.emplace(config, *report.certificate);
  }

  FluidState z = std::move(z0);
  report.distance.reserve(static_cast<std::size_t>(horizon) + 1);
  for (std::int64_t t = 0; t < horizon; ++t) {
    const double dist = weighted_distance(z, z_star);
    report.distance.push_back(dist);
    if (report.converged_at < 0 && dist < tol) report.converged_at = t;
    if (options.record_states) report.states.push_back(z.mass);

    FluidState before;
    if (audit) before = z;
    const ScheduleDecision d = fluid_step(z, config);
    if (audit) audit->observe(before, d);
    if (options.record_decisions) report.decisions.push_back(d);
  }
  const double final_dist = weighted_distance(z, z_star);
  report.distance.push_back(final_dist);
  if (report.converged_at < 0 && final_dist < tol) report.converged_at = horizon;

  report.monotone_from = 0;
  for (std::size_t i = 1; i < report.distance.size(); ++i) {
    if (report.distance[i] > report.distance[i - 1] + 1e-12) {
      report.monotone_from = static_cast<std::int64_t>(i);
    }
  }
  if (audit) report.audit = audit->finish();
  report.final_state = std::move(z);
  return report;
}

}  // namespace aoisched
