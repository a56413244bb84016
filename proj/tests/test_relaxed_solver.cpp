#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "aoisched/relaxed_solver.hpp"

using namespace aoisched;

namespace {

SystemConfig fig5_config() {
  return SystemConfig({{0.8, 0.5}, {0.5, 0.5}}, 0.5);
}

SystemConfig random_config(std::mt19937_64& gen, int max_classes) {
  std::uniform_int_distribution<int> k_dist(1, max_classes);
  std::uniform_real_distribution<double> p_dist(0.15, 1.0);
  std::uniform_real_distribution<double> share_dist(0.1, 1.0);
  std::uniform_real_distribution<double> alpha_dist(0.05, 0.95);
  const int k = k_dist(gen);
  std::vector<double> p(k);
  for (;;) {
    for (double& v : p) v = p_dist(gen);
    std::sort(p.begin(), p.end(), std::greater<>());
    bool distinct = true;
    for (int i = 1; i < k; ++i) {
      if (p[i - 1] - p[i] < 0.02) distinct = false;
    }
    if (distinct) break;
  }
  std::vector<double> share(k);
  double total = 0.0;
  for (double& v : share) {
    v = share_dist(gen);
    total += v;
  }
  std::vector<ClassSpec> classes(k);
  double acc = 0.0;
  for (int i = 0; i < k; ++i) {
    // Last share takes the exact remainder so they sum to 1 in floating point.
    const double s = i + 1 == k ? 1.0 - acc : share[i] / total;
    acc += s;
    classes[i] = {p[i], s};
  }
  return SystemConfig(std::move(classes), alpha_dist(gen));
}

}  // namespace

TEST_CASE("single deterministic class with half budget") {
  const RelaxedSolution sol = solve_relaxed(SystemConfig({{1.0, 1.0}}, 0.5));
  CHECK(sol.l1 == std::vector<int>{2});
  CHECK(sol.l2 == std::vector<int>{2});
  CHECK(sol.theta == 1.0);
  CHECK(sol.critical_class == -1);
  CHECK(sol.w_star == 1.0);  // of the two equivalent critical values, the smaller
  CHECK(sol.c_rp == doctest::Approx(1.5).epsilon(1e-14));
  REQUIRE(sol.z_star.mass[0].size() >= 2);
  CHECK(sol.z_star.mass[0][0] == doctest::Approx(0.5));
  CHECK(sol.z_star.mass[0][1] == doctest::Approx(0.5));
}

TEST_CASE("near-saturated budget drives the cost to the geometric mean age") {
  const RelaxedSolution sol = solve_relaxed(SystemConfig({{0.5, 1.0}}, 0.999));
  CHECK(sol.l1 == std::vector<int>{2});
  CHECK(sol.l2 == std::vector<int>{1});
  CHECK(sol.theta < 0.01);
  CHECK(sol.c_rp == doctest::Approx(2.0).epsilon(5e-3));
}

TEST_CASE("fig5 configuration solves to the hand-computed optimum") {
  const RelaxedSolution sol = solve_relaxed(fig5_config());
  CHECK(sol.w_star == doctest::Approx(2.8).epsilon(1e-13));
  CHECK(sol.l1 == std::vector<int>{3, 3});
  CHECK(sol.l2 == std::vector<int>{2, 3});
  CHECK(sol.critical_class == 0);
  CHECK(sol.theta == doctest::Approx(0.325).epsilon(1e-12));
  CHECK(sol.c_rp == doctest::Approx(2.3).epsilon(1e-12));
  const double residual =
      std::abs(sol.theta * sol.f1 + (1.0 - sol.theta) * sol.f2 - 0.5);
  CHECK(residual < 1e-12);

  // z* head entries, worked out by hand from the two mixed distributions.
  CHECK(sol.z_star.mass[0][0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sol.z_star.mass[0][1] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(sol.z_star.mass[0][2] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(sol.z_star.mass[0][3] == doctest::Approx(0.016).epsilon(1e-12));
  CHECK(sol.z_star.mass[1][0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(sol.z_star.mass[1][2] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(sol.z_star.mass[1][3] == doctest::Approx(0.0625).epsilon(1e-12));
}

TEST_CASE("relaxed cost by truncated summation matches the closed form") {
  std::mt19937_64 gen(202406);
  for (int trial = 0; trial < 40; ++trial) {
    const SystemConfig config = random_config(gen, 3);
    const RelaxedSolution sol = solve_relaxed(config);
    CHECK(relaxed_cost(sol) == doctest::Approx(sol.c_rp).epsilon(1e-10));
  }
}

TEST_CASE("degenerate mixtures collapse to a single threshold cost") {
  // active_fraction(1, 4) = 1/4 exactly, so alpha = 0.25 lands on it.
  const RelaxedSolution sol = solve_relaxed(SystemConfig({{1.0, 1.0}}, 0.25));
  CHECK(sol.theta == 1.0);
  CHECK(sol.l1 == std::vector<int>{4});
  CHECK(sol.c_rp == doctest::Approx(threshold_average_cost(1.0, 4, 0.0)).epsilon(1e-14));
}

TEST_CASE("solution structure holds for random configurations") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 200; ++trial) {
    const SystemConfig config = random_config(gen, 3);
    const RelaxedSolution sol = solve_relaxed(config);
    const double residual = std::abs(sol.theta * sol.f1 + (1.0 - sol.theta) * sol.f2 -
                                     config.alpha());
    CHECK(residual < 1e-12);
    CHECK(sol.theta > 0.0);
    CHECK(sol.theta <= 1.0);
    CHECK(sol.f1 <= config.alpha());
    CHECK(sol.f2 >= config.alpha());
    for (std::size_t k = 0; k < config.num_classes(); ++k) {
      const int diff = sol.l1[k] - sol.l2[k];
      CHECK(diff >= 0);
      CHECK(diff <= 1);
      CHECK((diff == 1) == (static_cast<int>(k) == sol.critical_class));
      double mass = sol.z_star.tail_mass[k];
      for (double v : sol.z_star.mass[k]) mass += v;
      CHECK(mass == doctest::Approx(config.cls(k).share).epsilon(1e-12));
    }
  }
}

TEST_CASE("more budget never hurts") {
  double prev = 1e300;
  for (double alpha : {0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.9}) {
    const RelaxedSolution sol = solve_relaxed(SystemConfig({{0.8, 0.5}, {0.5, 0.5}}, alpha));
    CHECK(sol.c_rp <= prev + 1e-12);
    prev = sol.c_rp;
  }
}

TEST_CASE("fixed_point returns the same proportions as the full solve") {
  const SystemConfig config = fig5_config();
  const FixedPointVector z = fixed_point(config);
  const RelaxedSolution sol = solve_relaxed(config);
  REQUIRE(z.mass.size() == sol.z_star.mass.size());
  for (std::size_t k = 0; k < z.mass.size(); ++k) {
    REQUIRE(z.mass[k] == sol.z_star.mass[k]);
  }
}
