#include "relsal/net/pca.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"

namespace relsal::net {
namespace {

using relsal::testing::covariance;
using relsal::testing::jacobi;
using relsal::testing::spread_stack;

TEST(PcaTest, MatchesJacobiEigendecompositionUpToSign) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = relsal::testing::uniform_int(rng, 4, 16);
    const int w = relsal::testing::uniform_int(rng, 4, 16);
    const auto x = spread_stack(rng, h, w);
    const auto pca = pca_visualize(x);
    const auto oracle = jacobi(covariance(x));
    ASSERT_EQ(pca.valid_components, 3);
    ASSERT_FALSE(pca.rank_deficient);
    for (int k = 0; k < kPcaComponents; ++k) {
      const auto& got = pca.components[static_cast<std::size_t>(k)];
      const auto& want = oracle.vectors[static_cast<std::size_t>(k)];
      ASSERT_NEAR(pca.eigenvalues[static_cast<std::size_t>(k)],
                  oracle.values[static_cast<std::size_t>(k)], 1e-9 * oracle.values[0]);
      double d = 0.0;
      for (std::size_t i = 0; i < 12; ++i) {
        d += got[i] * want[i];
      }
      const double sign = d < 0 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < 12; ++i) {
        ASSERT_NEAR(got[i], sign * want[i], 1e-8) << "trial " << trial << " pc " << k;
      }
    }
  }
}

TEST(PcaTest, SignConventionAndProjections) {
  std::mt19937_64 rng(42);
  const auto x = spread_stack(rng, 6, 7);
  const auto pca = pca_visualize(x);
  for (int k = 0; k < kPcaComponents; ++k) {
    const auto& v = pca.components[static_cast<std::size_t>(k)];
    const auto big = std::max_element(v.begin(), v.end(), [](double a, double b) {
      return std::abs(a) < std::abs(b);
    });
    EXPECT_GT(*big, 0.0);
    // Projections are centred pixel dot component; their variance is the eigenvalue.
    double var = 0.0;
    for (const double p : pca.projections[static_cast<std::size_t>(k)]) {
      var += p * p;
    }
    var /= 42.0;
    EXPECT_NEAR(var, pca.eigenvalues[static_cast<std::size_t>(k)], 1e-9);
  }
}

TEST(PcaTest, RgbSpansFullRangePerComponent) {
  std::mt19937_64 rng(43);
  const auto pca = pca_visualize(spread_stack(rng, 8, 8));
  ASSERT_EQ(pca.rgb.channels, 3);
  ASSERT_EQ(pca.rgb.bit_depth, 8);
  for (int c = 0; c < 3; ++c) {
    std::uint16_t lo = 255;
    std::uint16_t hi = 0;
    for (std::size_t p = 0; p < 64; ++p) {
      lo = std::min(lo, pca.rgb.samples[p * 3 + static_cast<std::size_t>(c)]);
      hi = std::max(hi, pca.rgb.samples[p * 3 + static_cast<std::size_t>(c)]);
    }
    EXPECT_EQ(lo, 0);
    EXPECT_EQ(hi, 255);
  }
}

TEST(PcaTest, ConstantStackIsFlaggedAndBlack) {
  const Tensor<double> x(12, 5, 5, 0.4);
  const auto pca = pca_visualize(x);
  EXPECT_TRUE(pca.rank_deficient);
  EXPECT_EQ(pca.valid_components, 0);
  for (const auto s : pca.rgb.samples) {
    ASSERT_EQ(s, 0);
  }
}

TEST(PcaTest, SingleVaryingChannelGivesOneAxisAlignedComponent) {
  std::mt19937_64 rng(44);
  Tensor<double> x(12, 4, 4, 0.1);
  for (auto& v : x.channel(5)) {
    v = relsal::testing::uniform_real(rng);
  }
  const auto pca = pca_visualize(x);
  EXPECT_TRUE(pca.rank_deficient);
  EXPECT_EQ(pca.valid_components, 1);
  EXPECT_NEAR(pca.components[0][5], 1.0, 1e-12);
  for (const double v : pca.components[1]) {
    EXPECT_EQ(v, 0.0);
  }
  for (std::size_t p = 0; p < 16; ++p) {
    EXPECT_EQ(pca.rgb.samples[p * 3 + 1], 0);
    EXPECT_EQ(pca.rgb.samples[p * 3 + 2], 0);
  }
}

TEST(PcaTest, FloatInputAgreesWithDouble) {
  std::mt19937_64 rng(45);
  const auto x = spread_stack(rng, 8, 8);
  const auto d = pca_visualize(x);
  const auto f = pca_visualize(x.cast<float>());
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_NEAR(d.components[0][i], f.components[0][i], 1e-5);
  }
}

}  // namespace
}  // namespace relsal::net
