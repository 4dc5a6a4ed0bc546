#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "relsal/error.hpp"

namespace relsal::net {

/// Channel-major (C, H, W) activation tensor. Flat feature vectors use (n, 1, 1).
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(int channels, int height, int width, T fill = T{0})
      : channels_(channels), height_(height), width_(width) {
    if (channels < 0 || height < 0 || width < 0) {
      throw ShapeError("negative tensor dimension");
    }
    values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  [[nodiscard]] int channels() const noexcept { return channels_; }
  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

  [[nodiscard]] T* data() noexcept { return values_.data(); }
  [[nodiscard]] const T* data() const noexcept { return values_.data(); }
  [[nodiscard]] std::span<T> values() noexcept { return values_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }

  [[nodiscard]] std::span<T> channel(int c) noexcept {
    return {values_.data() + static_cast<std::size_t>(c) * plane(), plane()};
  }
  [[nodiscard]] std::span<const T> channel(int c) const noexcept {
    return {values_.data() + static_cast<std::size_t>(c) * plane(), plane()};
  }

  T& at(int c, int y, int x) noexcept { return values_[offset(c, y, x)]; }
  [[nodiscard]] T at(int c, int y, int x) const noexcept { return values_[offset(c, y, x)]; }

  T& operator[](std::size_t i) noexcept { return values_[i]; }
  T operator[](std::size_t i) const noexcept { return values_[i]; }

  void fill(T v) { std::fill(values_.begin(), values_.end(), v); }

  template <typename U>
  [[nodiscard]] bool same_shape(const Tensor<U>& o) const noexcept {
    return channels_ == o.channels() && height_ == o.height() && width_ == o.width();
  }

  [[nodiscard]] std::string shape_string() const {
    return "(" + std::to_string(channels_) + "," + std::to_string(height_) + "," +
           std::to_string(width_) + ")";
  }

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    Tensor<U> out(channels_, height_, width_);
    std::transform(values_.begin(), values_.end(), out.values().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  [[nodiscard]] std::size_t offset(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

template <typename A, typename B>
void require_same_shape(const Tensor<A>& a, const Tensor<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace relsal::net
