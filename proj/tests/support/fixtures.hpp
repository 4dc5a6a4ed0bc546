#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "relsal/net/tensor.hpp"
#include "relsal/raster.hpp"

namespace relsal::testing {

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline AgreementMap random_agreement(std::mt19937_64& rng, int w, int h, int n_observers) {
  Raster<std::uint8_t> counts(w, h, 0);
  for (auto& v : counts.values()) {
    v = static_cast<std::uint8_t>(uniform_int(rng, 0, n_observers));
  }
  return AgreementMap(std::move(counts), n_observers);
}

inline SaliencyMap random_saliency(std::mt19937_64& rng, int w, int h) {
  Raster<double> values(w, h, 0.0);
  for (auto& v : values.values()) {
    v = uniform_real(rng);
  }
  return SaliencyMap(std::move(values));
}

inline BinaryMap random_binary(std::mt19937_64& rng, int w, int h, double p = 0.5) {
  Raster<std::uint8_t> bits(w, h, 0);
  for (auto& v : bits.values()) {
    v = uniform_real(rng) < p ? 1 : 0;
  }
  return BinaryMap(std::move(bits));
}

template <typename T>
net::Tensor<T> random_tensor(std::mt19937_64& rng, int c, int h, int w, double lo = -1.0,
                             double hi = 1.0) {
  net::Tensor<T> t(c, h, w);
  for (auto& v : t.values()) {
    v = static_cast<T>(uniform_real(rng, lo, hi));
  }
  return t;
}

/// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("relsal_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace relsal::testing
