#include "aoisched/system.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace aoisched {

SystemConfig::SystemConfig(std::vector<ClassSpec> classes, double alpha)
    : classes_(std::move(classes)), alpha_(alpha) {
  if (classes_.empty()) {
    throw std::invalid_argument("SystemConfig: need at least one class");
  }
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) {
    throw std::invalid_argument("SystemConfig: alpha must be strictly inside (0, 1), got " +
                                std::to_string(alpha_));
  }
  double share_sum = 0.0;
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const ClassSpec& c = classes_[k];
    if (!(c.p > 0.0 && c.p <= 1.0)) {
      throw std::invalid_argument("SystemConfig: class success probability must be in (0, 1]");
    }
    if (!(c.share > 0.0 && c.share <= 1.0)) {
      throw std::invalid_argument("SystemConfig: class share must be in (0, 1]");
    }
    if (k > 0 && classes_[k - 1].p < c.p) {
      throw std::invalid_argument("SystemConfig: classes must be ordered by nonincreasing p");
    }
    share_sum += c.share;
  }
  if (std::abs(share_sum - 1.0) > 1e-12) {
    throw std::invalid_argument("SystemConfig: class shares must sum to 1 (got " +
                                std::to_string(share_sum) + ")");
  }
}

}  // namespace aoisched
