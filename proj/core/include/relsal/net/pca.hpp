#pragma once

#include <array>
#include <vector>

#include "relsal/image_io.hpp"
#include "relsal/net/tensor.hpp"

namespace relsal::net {

inline constexpr int kPcaComponents = 3;

struct PcaVisualization {
  ImageData rgb;  // 8-bit, 3 channels; PC1 -> R, PC2 -> G, PC3 -> B
  /// Leading unit eigenvectors of the channel covariance, largest eigenvalue first.
  /// Each is signed so its largest-magnitude entry is positive. Missing ones are zero.
  std::array<std::vector<double>, kPcaComponents> components;
  std::array<double, kPcaComponents> eigenvalues{};
  /// Raw projections of the centred pixels, component-major (component, pixel).
  std::array<std::vector<double>, kPcaComponents> projections;
  int valid_components = 0;
  /// Set when fewer than three components carry variance.
  bool rank_deficient = false;
};

/// Per-image PCA over pixels treated as channel-dimensional samples. Eigenvalues at or
/// below rel_tolerance times the covariance trace count as missing components.
template <typename T>
PcaVisualization pca_visualize(const Tensor<T>& nrss, double rel_tolerance = 1e-9);

}  // namespace relsal::net
