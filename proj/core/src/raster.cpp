#include "relsal/raster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace relsal {

AgreementMap::AgreementMap(Raster<std::uint8_t> counts, int n_observers)
    : counts_(std::move(counts)), n_observers_(n_observers) {
  if (n_observers < 1 || n_observers > kMaxObservers) {
    throw RangeError("n_observers must lie in [1, 255], got " + std::to_string(n_observers));
  }
  if (counts_.empty()) {
    throw ShapeError("agreement map is empty");
  }
  const auto values = counts_.values();
  const auto it = std::find_if(values.begin(), values.end(),
                               [&](std::uint8_t v) { return v > n_observers_; });
  if (it != values.end()) {
    const auto i = static_cast<std::size_t>(it - values.begin());
    throw RangeError("agreement value " + std::to_string(*it) + " at pixel (" +
                     std::to_string(i % counts_.width()) + "," +
                     std::to_string(i / counts_.width()) + ") exceeds N=" +
                     std::to_string(n_observers_));
  }
}

BinaryMap::BinaryMap(Raster<std::uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.empty()) {
    throw ShapeError("binary map is empty");
  }
  for (const auto v : bits_.values()) {
    if (v > 1) {
      throw RangeError("binary map holds non-binary value " + std::to_string(v));
    }
  }
}

std::size_t BinaryMap::count_ones() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.values().begin(), bits_.values().end(), 1));
}

SaliencyMap::SaliencyMap(Raster<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw ShapeError("saliency map is empty");
  }
  for (const double v : values_.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw RangeError("saliency value " + std::to_string(v) + " outside [0,1]");
    }
  }
}

SaliencyMap SaliencyMap::clamped(Raster<double> values) {
  if (values.empty()) {
    throw ShapeError("saliency map is empty");
  }
  for (double& v : values.values()) {
    v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  }
  return SaliencyMap(std::move(values), Unchecked{});
}

InstanceMap::InstanceMap(Raster<std::uint16_t> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw ShapeError("instance map is empty");
  }
  std::vector<std::uint8_t> seen(65536, 0);
  for (const auto v : labels_.values()) {
    seen[v] = 1;
  }
  for (std::size_t id = 1; id < seen.size(); ++id) {
    if (seen[id] != 0) {
      ids_.push_back(static_cast<std::uint16_t>(id));
    }
  }
}

NestedStack::NestedStack(std::vector<BinaryMap> slices) : slices_(std::move(slices)) {
  if (slices_.empty()) {
    throw ShapeError("nested stack needs at least one slice");
  }
  if (slices_.size() > static_cast<std::size_t>(AgreementMap::kMaxObservers)) {
    throw RangeError("nested stack has more than 255 slices");
  }
  for (const auto& s : slices_) {
    require_same_shape(s.bits(), slices_.front().bits(), "nested stack slices");
  }
}

const BinaryMap& NestedStack::slice(int k) const {
  if (k < 1 || k > n_observers()) {
    throw RangeError("slice index " + std::to_string(k) + " outside [1, " +
                     std::to_string(n_observers()) + "]");
  }
  return slices_[static_cast<std::size_t>(k - 1)];
}

bool NestedStack::is_nested() const noexcept {
  for (std::size_t k = 1; k < slices_.size(); ++k) {
    const auto lower = slices_[k - 1].bits().values();
    const auto upper = slices_[k].bits().values();
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (upper[i] > lower[i]) {
        return false;
      }
    }
  }
  return true;
}

void NestedStack::check_nesting() const {
  const int w = width();
  for (std::size_t k = 1; k < slices_.size(); ++k) {
    const auto lower = slices_[k - 1].bits().values();
    const auto upper = slices_[k].bits().values();
    for (std::size_t i = 0; i < lower.size(); ++i) {
      if (upper[i] > lower[i]) {
        throw InvariantError("stack is not nested at pixel (" + std::to_string(i % w) + "," +
                             std::to_string(i / w) + "): slice " + std::to_string(k + 1) +
                             " is set but slice " + std::to_string(k) + " is not");
      }
    }
  }
}

}  // namespace relsal
