#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "relsal/harness/manifest.hpp"

namespace relsal::harness {

enum class ShapeKind { kRectangle, kEllipse };

struct SyntheticSpec {
  int width = 64;
  int height = 64;
  int n_images = 10;
  int min_instances = 1;
  int max_instances = 8;
  int n_observers = kDefaultObservers;
  /// Agreement levels instances draw from, without replacement within an image.
  /// Empty means {1, ..., n_observers}.
  std::vector<int> levels;
  std::vector<ShapeKind> kinds{ShapeKind::kRectangle, ShapeKind::kEllipse};
  std::uint64_t seed = 7;
  int max_attempts = 500;  // placement attempts per instance

  void validate() const;
};

/// Shapes over a noise background. Instances never touch, so each pixel belongs to at
/// most one instance; shape brightness increases with its agreement level.
/// Throws RangeError when an image cannot be packed within max_attempts per shape.
std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec);

/// Writes images/, agreement/, instances/ PNGs and manifest.jsonl under out_dir and
/// returns the manifest path.
std::filesystem::path write_dataset(const std::vector<LabeledImage>& data,
                                    const std::filesystem::path& out_dir);

}  // namespace relsal::harness
