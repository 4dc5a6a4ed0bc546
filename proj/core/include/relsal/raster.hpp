#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "relsal/error.hpp"

namespace relsal {

/// Dense row-major single-channel raster.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
    check_dims(width, height);
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Raster(int width, int height, std::vector<T> values)
      : width_(width), height_(height), values_(std::move(values)) {
    check_dims(width, height);
    if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ShapeError("raster payload has " + std::to_string(values_.size()) +
                       " values, expected " + std::to_string(width) + "x" + std::to_string(height));
    }
  }

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

  [[nodiscard]] T operator()(int x, int y) const { return values_[index(x, y)]; }
  T& operator()(int x, int y) { return values_[index(x, y)]; }
  [[nodiscard]] T operator[](std::size_t i) const { return values_[i]; }
  T& operator[](std::size_t i) { return values_[i]; }

  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
  [[nodiscard]] std::span<T> values() noexcept { return values_; }

  template <typename U>
  [[nodiscard]] bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width < 1 || height < 1) {
      throw ShapeError("raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                       std::to_string(height));
    }
  }

  [[nodiscard]] std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> values_;
};

template <typename A, typename B>
void require_same_shape(const Raster<A>& a, const Raster<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) +
                     "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

/// Per-pixel count of observers (0..N) who marked the pixel salient.
class AgreementMap {
 public:
  static constexpr int kMaxObservers = 255;

  AgreementMap(Raster<std::uint8_t> counts, int n_observers);

  [[nodiscard]] const Raster<std::uint8_t>& counts() const noexcept { return counts_; }
  [[nodiscard]] int n_observers() const noexcept { return n_observers_; }
  [[nodiscard]] int width() const noexcept { return counts_.width(); }
  [[nodiscard]] int height() const noexcept { return counts_.height(); }

  friend bool operator==(const AgreementMap&, const AgreementMap&) = default;

 private:
  Raster<std::uint8_t> counts_;
  int n_observers_;
};

/// Strictly {0,1} valued map; one slice of a nested stack or a thresholded agreement map.
class BinaryMap {
 public:
  explicit BinaryMap(Raster<std::uint8_t> bits);

  [[nodiscard]] const Raster<std::uint8_t>& bits() const noexcept { return bits_; }
  [[nodiscard]] int width() const noexcept { return bits_.width(); }
  [[nodiscard]] int height() const noexcept { return bits_.height(); }
  [[nodiscard]] std::size_t count_ones() const noexcept;

  friend bool operator==(const BinaryMap&, const BinaryMap&) = default;

 private:
  Raster<std::uint8_t> bits_;
};

/// Real-valued salience in [0,1].
class SaliencyMap {
 public:
  /// Rejects non-finite values and values outside [0,1].
  explicit SaliencyMap(Raster<double> values);

  /// Maps non-finite values to 0 and clamps the rest into [0,1].
  static SaliencyMap clamped(Raster<double> values);

  [[nodiscard]] const Raster<double>& values() const noexcept { return values_; }
  [[nodiscard]] int width() const noexcept { return values_.width(); }
  [[nodiscard]] int height() const noexcept { return values_.height(); }

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;

 private:
  struct Unchecked {};
  SaliencyMap(Raster<double> values, Unchecked) : values_(std::move(values)) {}

  Raster<double> values_;
};

/// Per-pixel instance labels, 0 = background.
class InstanceMap {
 public:
  explicit InstanceMap(Raster<std::uint16_t> labels);

  [[nodiscard]] const Raster<std::uint16_t>& labels() const noexcept { return labels_; }
  /// Sorted ascending; exactly the nonzero labels that occur.
  [[nodiscard]] const std::vector<std::uint16_t>& instance_ids() const noexcept { return ids_; }
  [[nodiscard]] int width() const noexcept { return labels_.width(); }
  [[nodiscard]] int height() const noexcept { return labels_.height(); }

 private:
  Raster<std::uint16_t> labels_;
  std::vector<std::uint16_t> ids_;
};

/// N binary slices; slice i (1-based) marks pixels where at least i observers agree.
///
/// Construction checks shapes only so that corrupted stacks can be represented and
/// rejected by consumers; use check_nesting() or collapse_stack() to validate.
class NestedStack {
 public:
  explicit NestedStack(std::vector<BinaryMap> slices);

  [[nodiscard]] int n_observers() const noexcept { return static_cast<int>(slices_.size()); }
  [[nodiscard]] int width() const noexcept { return slices_.front().width(); }
  [[nodiscard]] int height() const noexcept { return slices_.front().height(); }
  /// 1-based slice access, k in [1, N].
  [[nodiscard]] const BinaryMap& slice(int k) const;
  [[nodiscard]] const std::vector<BinaryMap>& slices() const noexcept { return slices_; }

  [[nodiscard]] bool is_nested() const noexcept;
  /// Throws InvariantError naming the first offending pixel.
  void check_nesting() const;

 private:
  std::vector<BinaryMap> slices_;
};

/// Real-valued stack produced by downsampling a NestedStack for supervision.
struct SoftStack {
  std::vector<Raster<double>> slices;

  [[nodiscard]] int n_slices() const noexcept { return static_cast<int>(slices.size()); }
};

}  // namespace relsal
