#pragma once

#include <array>
#include <cstdint>

#include "relsal/image_io.hpp"
#include "relsal/ranking.hpp"

namespace relsal::harness {

/// Fill colour per predicted rank, 0xRRGGBB, rank 1 first. See docs/palette.md.
inline constexpr std::array<std::uint32_t, 12> kRankPalette = {
    0xDC050C, 0xE8601C, 0xF1932D, 0xF6C141, 0xF7F056, 0xCAE0AB,
    0x90C987, 0x4EB265, 0x7BAFDE, 0x5289C7, 0x1965B0, 0x882E72};

inline constexpr std::uint32_t kCorrectBorder = 0x0000FF;
inline constexpr std::uint32_t kIncorrectBorder = 0xFF0000;
inline constexpr int kBorderWidth = 2;

/// Palette entry for a (possibly fractional, tied) rank; ranks past 12 reuse the last colour.
std::uint32_t rank_colour(double rank) noexcept;

/// True when both vectors assign every instance the same rank.
bool same_order(const RankVector& gt, const RankVector& pred) noexcept;

/// 8-bit RGB: background is the predicted saliency in grey, each instance is filled with
/// the colour of its predicted rank, and a border marks whether the predicted order
/// matches gt_rank exactly (blue) or not (red).
ImageData render_rank_overlay(const SaliencyMap& saliency, const InstanceMap& instances,
                              const RankVector& gt_rank);

}  // namespace relsal::harness
