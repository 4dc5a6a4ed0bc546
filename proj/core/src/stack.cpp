#include "relsal/stack.hpp"

#include <string>

namespace relsal {

NestedStack build_nested_stack(const AgreementMap& agreement) {
  const int n = agreement.n_observers();
  const auto& counts = agreement.counts();
  std::vector<BinaryMap> slices;
  slices.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    Raster<std::uint8_t> bits(counts.width(), counts.height());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      bits[i] = counts[i] >= k ? 1 : 0;
    }
    slices.emplace_back(std::move(bits));
  }
  return NestedStack(std::move(slices));
}

AgreementMap collapse_stack(const NestedStack& stack) {
  stack.check_nesting();
  Raster<std::uint8_t> counts(stack.width(), stack.height());
  for (const auto& slice : stack.slices()) {
    const auto bits = slice.bits().values();
    for (std::size_t i = 0; i < bits.size(); ++i) {
      counts[i] = static_cast<std::uint8_t>(counts[i] + bits[i]);
    }
  }
  return AgreementMap(std::move(counts), stack.n_observers());
}

BinaryMap threshold_agreement(const AgreementMap& agreement, int k) {
  if (k < 1 || k > agreement.n_observers()) {
    throw RangeError("threshold k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(agreement.n_observers()) + "]");
  }
  const auto& counts = agreement.counts();
  Raster<std::uint8_t> bits(counts.width(), counts.height());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    bits[i] = counts[i] >= k ? 1 : 0;
  }
  return BinaryMap(std::move(bits));
}

SaliencyMap normalize_saliency(const AgreementMap& agreement) {
  const auto& counts = agreement.counts();
  const double n = agreement.n_observers();
  Raster<double> values(counts.width(), counts.height());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    values[i] = static_cast<double>(counts[i]) / n;
  }
  return SaliencyMap(std::move(values));
}

Raster<double> downsample(const Raster<double>& src, int target_w, int target_h,
                          DownsampleMethod method) {
  if (target_w < 1 || target_h < 1) {
    throw ShapeError("downsample target dimensions must be >= 1, got " +
                     std::to_string(target_w) + "x" + std::to_string(target_h));
  }
  if (target_w > src.width() || target_h > src.height() || src.width() % target_w != 0 ||
      src.height() % target_h != 0) {
    throw ShapeError("downsample from " + std::to_string(src.width()) + "x" +
                     std::to_string(src.height()) + " to " + std::to_string(target_w) + "x" +
                     std::to_string(target_h) + " needs integer reduction factors");
  }
  const int fx = src.width() / target_w;
  const int fy = src.height() / target_h;
  Raster<double> out(target_w, target_h);
  for (int y = 0; y < target_h; ++y) {
    for (int x = 0; x < target_w; ++x) {
      if (method == DownsampleMethod::kNearest) {
        out(x, y) = src(x * fx + fx / 2, y * fy + fy / 2);
        continue;
      }
      double sum = 0.0;
      for (int dy = 0; dy < fy; ++dy) {
        for (int dx = 0; dx < fx; ++dx) {
          sum += src(x * fx + dx, y * fy + dy);
        }
      }
      out(x, y) = sum / static_cast<double>(fx * fy);
    }
  }
  return out;
}

std::pair<SoftStack, SaliencyMap> downsample_targets(const NestedStack& stack,
                                                     const SaliencyMap& saliency, int target_w,
                                                     int target_h, DownsampleMethod method) {
  require_same_shape(stack.slice(1).bits(), saliency.values(), "downsample_targets");
  SoftStack soft;
  soft.slices.reserve(stack.slices().size());
  for (const auto& slice : stack.slices()) {
    const auto bits = slice.bits().values();
    Raster<double> real(slice.width(), slice.height());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      real[i] = bits[i];
    }
    soft.slices.push_back(downsample(real, target_w, target_h, method));
  }
  // Block means of values in [0,1] stay in [0,1].
  return {std::move(soft),
          SaliencyMap::clamped(downsample(saliency.values(), target_w, target_h, method))};
}

}  // namespace relsal
