#pragma once

#include <utility>

#include "relsal/raster.hpp"

namespace relsal {

/// Slice k is 1 exactly where at least k observers agree.
NestedStack build_nested_stack(const AgreementMap& agreement);

/// Inverse of build_nested_stack. Throws InvariantError on a non-nested stack.
AgreementMap collapse_stack(const NestedStack& stack);

/// Binary map of pixels with agreement >= k, k in [1, N].
BinaryMap threshold_agreement(const AgreementMap& agreement, int k);

/// agreement / N.
SaliencyMap normalize_saliency(const AgreementMap& agreement);

enum class DownsampleMethod { kArea, kNearest };

/// Reduce stack slices and the saliency map to (target_w, target_h) for supervision.
/// Source dims must be integer multiples of the target dims.
std::pair<SoftStack, SaliencyMap> downsample_targets(const NestedStack& stack,
                                                     const SaliencyMap& saliency, int target_w,
                                                     int target_h,
                                                     DownsampleMethod method = DownsampleMethod::kArea);

/// Single-raster form of the downsampling used by downsample_targets.
Raster<double> downsample(const Raster<double>& src, int target_w, int target_h,
                          DownsampleMethod method = DownsampleMethod::kArea);

}  // namespace relsal
