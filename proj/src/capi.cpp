#include "aoisched.h"

#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <stdexcept>
#include <string>

#include "aoisched/experiments.hpp"
#include "aoisched/fluid.hpp"
#include "aoisched/policy_core.hpp"
#include "aoisched/relaxed_solver.hpp"
#include "aoisched/sim.hpp"
#include "aoisched/system.hpp"

namespace {

thread_local std::string g_last_error;

aoi_status set_error(aoi_status status, const char* what) {
  g_last_error = what ? what : "unknown error";
  return status;
}

template <class F>
aoi_status guarded(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    return set_error(AOI_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(AOI_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return set_error(AOI_ERR_RUNTIME, e.what());
  } catch (...) {
    return set_error(AOI_ERR_RUNTIME, "unknown error");
  }
}

aoi_status require(bool ok, const char* what) {
  return ok ? AOI_OK : set_error(AOI_ERR_INVALID_ARGUMENT, what);
}

}  // namespace

struct aoi_system {
  aoisched::SystemConfig config;
};

struct aoi_relaxed {
  aoisched::RelaxedSolution solution;
  std::string json;
};

struct aoi_experiment {
  nlohmann::ordered_json spec;
  std::string summary;
  std::string kind;
};

extern "C" {

const char* aoi_version(void) { return "0.1.0"; }

const char* aoi_rng_algorithm(void) { return aoisched::kRngAlgorithm; }

const char* aoi_last_error(void) { return g_last_error.c_str(); }

aoi_status aoi_whittle_index(double p, int64_t age, double* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::whittle_index(p, age);
    return AOI_OK;
  });
}

aoi_status aoi_active_fraction(double p, int64_t threshold, double* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::active_fraction(p, static_cast<int>(threshold));
    return AOI_OK;
  });
}

aoi_status aoi_threshold_average_cost(double p, int64_t threshold, double lambda, double* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::threshold_average_cost(p, static_cast<int>(threshold), lambda);
    return AOI_OK;
  });
}

aoi_status aoi_stationary_distribution(double p, int64_t threshold, int64_t max_state,
                                       double* probs, double* tail_mass) {
  if (aoi_status s = require(probs != nullptr && tail_mass != nullptr, "output is NULL");
      s != AOI_OK) {
    return s;
  }
  return guarded([&] {
    const aoisched::ThresholdDistribution d = aoisched::stationary_distribution(
        p, static_cast<int>(threshold), static_cast<int>(max_state));
    std::memcpy(probs, d.probs.data(), d.probs.size() * sizeof(double));
    *tail_mass = d.tail_mass;
    return AOI_OK;
  });
}

aoi_status aoi_compute_d(double p_hi, double p_lo, double* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::compute_D(p_hi, p_lo);
    return AOI_OK;
  });
}

aoi_status aoi_assumption_bound(double p_hi, double p_lo, double* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::assumption_bound(p_hi, p_lo);
    return AOI_OK;
  });
}

aoi_status aoi_t_max(double alpha, double p_lo, int64_t* out) {
  if (aoi_status s = require(out != nullptr, "out is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    *out = aoisched::t_max(alpha, p_lo);
    return AOI_OK;
  });
}

aoi_status aoi_system_create(const double* p, const double* share, size_t k, double alpha,
                             aoi_system** out) {
  if (aoi_status s = require(out != nullptr && p != nullptr && share != nullptr && k > 0,
                             "bad arguments");
      s != AOI_OK) {
    return s;
  }
  return guarded([&] {
    std::vector<aoisched::ClassSpec> classes(k);
    for (size_t i = 0; i < k; ++i) classes[i] = {p[i], share[i]};
    *out = new aoi_system{aoisched::SystemConfig(std::move(classes), alpha)};
    return AOI_OK;
  });
}

void aoi_system_destroy(aoi_system* system) { delete system; }

aoi_status aoi_relaxed_solve(const aoi_system* system, aoi_relaxed** out) {
  if (aoi_status s = require(system != nullptr && out != nullptr, "bad arguments");
      s != AOI_OK) {
    return s;
  }
  return guarded([&] {
    *out = new aoi_relaxed{aoisched::solve_relaxed(system->config), {}};
    return AOI_OK;
  });
}

void aoi_relaxed_destroy(aoi_relaxed* solution) { delete solution; }

double aoi_relaxed_w_star(const aoi_relaxed* solution) { return solution->solution.w_star; }

double aoi_relaxed_theta(const aoi_relaxed* solution) { return solution->solution.theta; }

double aoi_relaxed_cost(const aoi_relaxed* solution) { return solution->solution.c_rp; }

aoi_status aoi_relaxed_thresholds(const aoi_relaxed* solution, int64_t* l1, int64_t* l2,
                                  size_t cap, size_t* out_k) {
  if (aoi_status s = require(solution != nullptr && out_k != nullptr, "bad arguments");
      s != AOI_OK) {
    return s;
  }
  const size_t k = solution->solution.l1.size();
  *out_k = k;
  if (aoi_status s = require(cap >= k || (l1 == nullptr && l2 == nullptr),
                             "threshold buffers too small");
      s != AOI_OK) {
    return s;
  }
  for (size_t i = 0; i < k && i < cap; ++i) {
    if (l1) l1[i] = solution->solution.l1[i];
    if (l2) l2[i] = solution->solution.l2[i];
  }
  return AOI_OK;
}

const char* aoi_relaxed_to_json(const aoi_relaxed* solution) {
  auto* mutable_solution = const_cast<aoi_relaxed*>(solution);
  if (mutable_solution->json.empty()) {
    const aoisched::RelaxedSolution& s = solution->solution;
    nlohmann::ordered_json j;
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const aoisched::ClassSpec& c : s.classes) {
      classes.push_back({{"p", c.p}, {"share", c.share}});
    }
    j["system"] = {{"classes", classes}, {"alpha", s.alpha}};
    j["w_star"] = s.w_star;
    j["theta"] = s.theta;
    j["c_rp"] = s.c_rp;
    j["l1"] = s.l1;
    j["l2"] = s.l2;
    j["critical_class"] = s.critical_class < 0 ? -1 : s.critical_class + 1;
    mutable_solution->json = j.dump(2);
  }
  return mutable_solution->json.c_str();
}

aoi_status aoi_experiment_create_from_file(const char* path, aoi_experiment** out) {
  if (aoi_status s = require(path != nullptr && out != nullptr, "bad arguments"); s != AOI_OK) {
    return s;
  }
  return guarded([&] {
    auto spec = aoisched::parse_experiment_file(path);
    std::string kind = spec.at("kind").get<std::string>();
    *out = new aoi_experiment{std::move(spec), {}, std::move(kind)};
    return AOI_OK;
  });
}

aoi_status aoi_experiment_create_from_json(const char* json_text, aoi_experiment** out) {
  if (aoi_status s = require(json_text != nullptr && out != nullptr, "bad arguments");
      s != AOI_OK) {
    return s;
  }
  return guarded([&] {
    nlohmann::ordered_json spec;
    try {
      spec = nlohmann::ordered_json::parse(json_text);
    } catch (const std::exception& e) {
      throw std::invalid_argument(std::string("invalid JSON: ") + e.what());
    }
    aoisched::validate_experiment(spec);
    std::string kind = spec.at("kind").get<std::string>();
    *out = new aoi_experiment{std::move(spec), {}, std::move(kind)};
    return AOI_OK;
  });
}

const char* aoi_experiment_kind(const aoi_experiment* experiment) {
  return experiment ? experiment->kind.c_str() : nullptr;
}

aoi_status aoi_experiment_run(aoi_experiment* experiment, const aoi_run_options* options) {
  if (aoi_status s = require(experiment != nullptr, "experiment is NULL"); s != AOI_OK) return s;
  return guarded([&] {
    aoisched::RunOptions run;
    if (options) {
      if (options->out_dir) run.out_dir = options->out_dir;
      if (options->has_seed) run.seed = options->seed;
      run.no_timestamp = options->no_timestamp != 0;
      run.threads = options->threads;
      run.check = options->check != 0;
    }
    const aoisched::ExperimentResult result = aoisched::run_experiment(experiment->spec, run);
    experiment->summary = result.summary.dump(2);
    if (run.check && !result.checks_passed) {
      return set_error(AOI_ERR_CHECK_FAILED, "one or more result checks failed");
    }
    return AOI_OK;
  });
}

const char* aoi_experiment_summary_json(const aoi_experiment* experiment) {
  if (!experiment || experiment->summary.empty()) return nullptr;
  return experiment->summary.c_str();
}

void aoi_experiment_destroy(aoi_experiment* experiment) { delete experiment; }

}  // extern "C"
