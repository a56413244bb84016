#include <cmath>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "aoisched/policy_core.hpp"

using namespace aoisched;

namespace {

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    const double av = i < a.size() ? a[i] : 0.0;
    const double bv = i < b.size() ? b[i] : 0.0;
    s += std::abs(av - bv);
  }
  return s;
}

}  // namespace

TEST_CASE("whittle index point values") {
  CHECK(whittle_index(0.8, 1) == 1.0);
  CHECK(whittle_index(0.3, 1) == 1.0);
  CHECK(whittle_index(1.0, 1) == 1.0);
  CHECK(whittle_index(0.0, 5) == 5.0);
  CHECK(whittle_index(0.8, 3) == doctest::Approx(5.4).epsilon(1e-12));
}

TEST_CASE("whittle index rejects bad arguments") {
  CHECK_THROWS_AS(whittle_index(0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(whittle_index(0.5, -3), std::invalid_argument);
  CHECK_THROWS_AS(whittle_index(1.5, 2), std::invalid_argument);
}

TEST_CASE("whittle index difference identity is exact on a dyadic grid") {
  for (int num = 0; num <= 64; ++num) {
    const double p = static_cast<double>(num) / 64.0;
    for (std::int64_t i = 1; i <= 2000; ++i) {
      CHECK(whittle_index(p, i + 1) - whittle_index(p, i) ==
            static_cast<double>(i) * p + 1.0);
    }
  }
}

TEST_CASE("whittle index monotone in age and in p") {
  for (double p : {0.05, 0.37, 0.5, 0.93, 1.0}) {
    double prev = whittle_index(p, 1);
    for (std::int64_t i = 2; i <= 200; ++i) {
      const double cur = whittle_index(p, i);
      CHECK(cur > prev);
      prev = cur;
    }
  }
  for (std::int64_t i = 2; i <= 50; ++i) {
    CHECK(whittle_index(0.2, i) < whittle_index(0.7, i));
  }
}

TEST_CASE("stationary distribution closed forms") {
  SUBCASE("threshold 1 is geometric") {
    const ThresholdDistribution d = stationary_distribution(0.5, 1, 40);
    for (int i = 1; i <= 40; ++i) {
      CHECK(d.probs[i - 1] == doctest::Approx(std::pow(0.5, i)).epsilon(1e-13));
    }
  }
  SUBCASE("deterministic channel gives a uniform cycle") {
    const ThresholdDistribution d = stationary_distribution(1.0, 3, 16);
    CHECK(d.probs[0] == doctest::Approx(1.0 / 3.0));
    CHECK(d.probs[1] == doctest::Approx(1.0 / 3.0));
    CHECK(d.probs[2] == doctest::Approx(1.0 / 3.0));
    for (int i = 4; i <= 16; ++i) CHECK(d.probs[i - 1] == 0.0);
    CHECK(d.tail_mass == 0.0);
  }
  SUBCASE("p=0.8 threshold 2") {
    const ThresholdDistribution d = stationary_distribution(0.8, 2, 64);
    CHECK(d.probs[0] == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
    CHECK(d.probs[1] == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
    CHECK(d.probs[2] == doctest::Approx(4.0 / 45.0).epsilon(1e-13));
  }
}

TEST_CASE("stationary distribution invariants over a grid") {
  for (int pi = 1; pi <= 10; ++pi) {
    const double p = 0.1 * pi;
    for (int n = 1; n <= 8; ++n) {
      const int m = default_max_state(p, n);
      const ThresholdDistribution d = stationary_distribution(p, n, m);
      double sum = d.tail_mass;
      for (double v : d.probs) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(d.tail_mass < 1e-14);
      for (int i = 2; i <= n; ++i) CHECK(d.probs[i - 1] == d.probs[0]);
      for (int i = n + 1; i <= m; ++i) {
        CHECK(d.probs[i - 1] == doctest::Approx((1.0 - p) * d.probs[i - 2]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("stationary distribution rejects a dead channel") {
  CHECK_THROWS_AS(stationary_distribution(0.0, 2, 10), std::invalid_argument);
  CHECK_THROWS_AS(stationary_distribution(0.5, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(stationary_distribution(0.5, 4, 3), std::invalid_argument);
}

TEST_CASE("active fraction") {
  CHECK(active_fraction(0.7, 1) == 1.0);
  CHECK(active_fraction(0.5, 3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(active_fraction(1.0, 4) == doctest::Approx(0.25).epsilon(1e-14));

  for (int pi = 1; pi <= 10; ++pi) {
    const double p = 0.1 * pi;
    double prev = active_fraction(p, 1);
    CHECK(prev == 1.0);
    for (int n = 2; n <= 12; ++n) {
      const double cur = active_fraction(p, n);
      CHECK(cur < prev);
      CHECK(cur * (n * p + 1.0 - p) == doctest::Approx(1.0).epsilon(1e-12));
      prev = cur;
    }
  }
}

TEST_CASE("active fraction agrees with the summed distribution") {
  for (double p : {0.2, 0.6, 1.0}) {
    for (int n : {1, 3, 7}) {
      const int m = default_max_state(p, n);
      const ThresholdDistribution d = stationary_distribution(p, n, m);
      double tail_sum = d.tail_mass;
      for (int i = n; i <= m; ++i) tail_sum += d.probs[i - 1];
      CHECK(active_fraction(p, n) == doctest::Approx(tail_sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("threshold average cost point values") {
  CHECK(threshold_average_cost(1.0, 1, 0.0) == doctest::Approx(1.0));
  CHECK(threshold_average_cost(1.0, 2, 0.0) == doctest::Approx(1.5));
  CHECK(threshold_average_cost(0.5, 1, 2.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(threshold_average_cost(0.0, 1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(threshold_average_cost(0.5, 1, -1.0), std::invalid_argument);
}

TEST_CASE("threshold average cost equals the distribution expectation") {
  for (int pi = 1; pi <= 10; ++pi) {
    const double p = 0.1 * pi;
    for (int n = 1; n <= 10; ++n) {
      const int m = default_max_state(p, n);
      const ThresholdDistribution d = stationary_distribution(p, n, m);
      for (double lambda : {0.0, 1.0, 5.0}) {
        const double expectation = d.mean_age() + lambda * active_fraction(p, n);
        CHECK(threshold_average_cost(p, n, lambda) ==
              doctest::Approx(expectation).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("power-iteration oracle matches the closed form") {
  SUBCASE("deterministic cycle") {
    const std::vector<double> v = dtmc_stationary_oracle(1.0, 3, 16);
    CHECK(v[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(v[5] == doctest::Approx(0.0));
  }
  SUBCASE("geometric at threshold 1") {
    const std::vector<double> v = dtmc_stationary_oracle(0.5, 1, 64);
    for (int i = 1; i <= 20; ++i) {
      CHECK(v[i - 1] == doctest::Approx(std::pow(0.5, i)).epsilon(1e-10));
    }
  }
  SUBCASE("closed form within 1e-10 L1") {
    const std::vector<double> oracle = dtmc_stationary_oracle(0.8, 2, 64);
    const ThresholdDistribution d = stationary_distribution(0.8, 2, 64);
    CHECK(l1_distance(oracle, d.probs) < 1e-10);
  }
  SUBCASE("iteration cap reports non-convergence") {
    CHECK_THROWS_AS(dtmc_stationary_oracle(0.2, 4, 128, 3), std::runtime_error);
  }
}

TEST_CASE("indexability witness: passive share grows with the threshold") {
  for (int pi = 1; pi <= 10; ++pi) {
    const double p = 0.1 * pi;
    double prev = 1.0 - active_fraction(p, 1);
    for (int n = 2; n <= 10; ++n) {
      const double cur = 1.0 - active_fraction(p, n);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}
