#pragma once

#include <cstddef>
#include <vector>

namespace aoisched {

// One user class: channel decoding success probability and population share.
struct ClassSpec {
  double p = 0.0;      // success probability, in (0, 1]
  double share = 0.0;  // fraction of the population, in (0, 1]
};

// Validated system description. Classes are ordered by nonincreasing p
// (class 0 has the best channel); alpha is the per-slot scheduling budget
// M/N as a fraction of the population.
class SystemConfig {
 public:
  SystemConfig(std::vector<ClassSpec> classes, double alpha);

  const std::vector<ClassSpec>& classes() const { return classes_; }
  const ClassSpec& cls(std::size_t k) const { return classes_[k]; }
  std::size_t num_classes() const { return classes_.size(); }
  double alpha() const { return alpha_; }
  double min_p() const { return classes_.back().p; }

 private:
  std::vector<ClassSpec> classes_;
  double alpha_ = 0.0;
};

}  // namespace aoisched
