#include "relsal/harness/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace relsal::harness {

std::uint32_t rank_colour(double rank) noexcept {
  const auto last = static_cast<double>(kRankPalette.size() - 1);
  const double idx = std::clamp(std::floor(rank) - 1.0, 0.0, last);
  return kRankPalette[static_cast<std::size_t>(idx)];
}

bool same_order(const RankVector& gt, const RankVector& pred) noexcept {
  return gt == pred;
}

ImageData render_rank_overlay(const SaliencyMap& saliency, const InstanceMap& instances,
                              const RankVector& gt_rank) {
  require_same_shape(saliency.values(), instances.labels(), "rank overlay");
  const int w = saliency.width();
  const int h = saliency.height();
  ImageData out{w, h, 3, 8, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h * 3)};
  auto put = [&](int x, int y, std::uint32_t rgb) {
    const std::size_t px = (static_cast<std::size_t>(y) * w + x) * 3;
    out.samples[px] = static_cast<std::uint16_t>((rgb >> 16) & 0xFF);
    out.samples[px + 1] = static_cast<std::uint16_t>((rgb >> 8) & 0xFF);
    out.samples[px + 2] = static_cast<std::uint16_t>(rgb & 0xFF);
  };

  std::map<std::uint16_t, std::uint32_t> colour;
  bool correct = true;
  if (!instances.instance_ids().empty()) {
    const RankVector pred = rank_order(instance_rank_scores(saliency, instances));
    for (const auto& e : pred.entries) {
      colour[e.instance_id] = rank_colour(e.rank);
    }
    correct = same_order(gt_rank, pred);
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint16_t id = instances.labels()(x, y);
      if (id != 0) {
        put(x, y, colour.at(id));
      } else {
        const auto g = static_cast<std::uint32_t>(quantize_saliency(saliency.values()(x, y)));
        put(x, y, (g << 16) | (g << 8) | g);
      }
    }
  }
  const std::uint32_t border = correct ? kCorrectBorder : kIncorrectBorder;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x < kBorderWidth || y < kBorderWidth || x >= w - kBorderWidth ||
          y >= h - kBorderWidth) {
        put(x, y, border);
      }
    }
  }
  return out;
}

}  // namespace relsal::harness
