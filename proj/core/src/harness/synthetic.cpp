#include "relsal/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "relsal/error.hpp"

namespace relsal::harness {
namespace fs = std::filesystem;

namespace {

// Bit-stable draws: the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [lo, hi].
  int between(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

 private:
  std::mt19937_64 engine_;
};

struct Box {
  int x0, y0, x1, y1;  // inclusive

  [[nodiscard]] bool near(const Box& o) const noexcept {
    // One pixel of clearance keeps instances from touching.
    return !(x1 + 1 < o.x0 || o.x1 + 1 < x0 || y1 + 1 < o.y0 || o.y1 + 1 < y0);
  }
};

bool inside(ShapeKind kind, const Box& b, int x, int y) {
  if (kind == ShapeKind::kRectangle) {
    return true;
  }
  const double cx = 0.5 * (b.x0 + b.x1);
  const double cy = 0.5 * (b.y0 + b.y1);
  const double rx = 0.5 * (b.x1 - b.x0 + 1);
  const double ry = 0.5 * (b.y1 - b.y0 + 1);
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

std::uint16_t to_byte(double v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

LabeledImage generate_one(const SyntheticSpec& spec, const std::vector<int>& pool, Rng& rng,
                          int index) {
  const int w = spec.width;
  const int h = spec.height;
  const int min_side = std::max(3, std::min(w, h) / 10);
  const int max_side = std::max(min_side, std::min(w, h) / 3);
  const int n = rng.between(spec.min_instances, spec.max_instances);

  std::vector<int> levels = pool;
  for (int i = 0; i < n; ++i) {
    std::swap(levels[static_cast<std::size_t>(i)],
              levels[static_cast<std::size_t>(rng.between(i, static_cast<int>(levels.size()) - 1))]);
  }

  std::vector<Box> boxes;
  std::vector<ShapeKind> kinds;
  for (int i = 0; i < n; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const int bw = rng.between(min_side, max_side);
      const int bh = rng.between(min_side, max_side);
      if (bw > w || bh > h) {
        continue;
      }
      const int x0 = rng.between(0, w - bw);
      const int y0 = rng.between(0, h - bh);
      const Box b{x0, y0, x0 + bw - 1, y0 + bh - 1};
      if (std::none_of(boxes.begin(), boxes.end(), [&](const Box& o) { return b.near(o); })) {
        boxes.push_back(b);
        kinds.push_back(spec.kinds[static_cast<std::size_t>(
            rng.between(0, static_cast<int>(spec.kinds.size()) - 1))]);
        placed = true;
      }
    }
    if (!placed) {
      throw RangeError("could not place instance " + std::to_string(i + 1) + " of " +
                       std::to_string(n) + " in image " + std::to_string(index) + " after " +
                       std::to_string(spec.max_attempts) + " attempts");
    }
  }

  ImageData image{w, h, 3, 8, std::vector<std::uint16_t>(static_cast<std::size_t>(w) * h * 3)};
  Raster<std::uint8_t> agreement(w, h, 0);
  Raster<std::uint16_t> labels(w, h, 0);
  for (auto& s : image.samples) {
    s = to_byte(0.25 * rng.uniform());
  }
  for (int i = 0; i < n; ++i) {
    const Box& b = boxes[static_cast<std::size_t>(i)];
    const int level = levels[static_cast<std::size_t>(i)];
    const double base = 0.3 + 0.7 * level / spec.n_observers;
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        if (!inside(kinds[static_cast<std::size_t>(i)], b, x, y)) {
          continue;
        }
        agreement(x, y) = static_cast<std::uint8_t>(level);
        labels(x, y) = static_cast<std::uint16_t>(i + 1);
        const std::size_t px = (static_cast<std::size_t>(y) * w + x) * 3;
        for (int c = 0; c < 3; ++c) {
          image.samples[px + c] = to_byte(base + 0.06 * (rng.uniform() - 0.5));
        }
      }
    }
  }

  char id[32];
  std::snprintf(id, sizeof(id), "syn_%04d", index);
  return LabeledImage{id, std::move(image), AgreementMap(std::move(agreement), spec.n_observers),
                      InstanceMap(std::move(labels)), n};
}

}  // namespace

void SyntheticSpec::validate() const {
  if (width < 8 || height < 8) {
    throw RangeError("synthetic canvas must be at least 8x8");
  }
  if (n_images < 1) {
    throw RangeError("n_images must be >= 1");
  }
  if (min_instances < 1 || max_instances < min_instances) {
    throw RangeError("instance range must satisfy 1 <= min <= max");
  }
  if (n_observers < 1 || n_observers > AgreementMap::kMaxObservers) {
    throw RangeError("n_observers out of range");
  }
  for (const int l : levels) {
    if (l < 1 || l > n_observers) {
      throw RangeError("agreement level " + std::to_string(l) + " outside [1, " +
                       std::to_string(n_observers) + "]");
    }
  }
  const std::size_t pool = levels.empty() ? static_cast<std::size_t>(n_observers) : levels.size();
  if (pool < static_cast<std::size_t>(max_instances)) {
    throw RangeError("need at least max_instances distinct agreement levels");
  }
  if (kinds.empty()) {
    throw RangeError("at least one shape kind is required");
  }
  if (max_attempts < 1) {
    throw RangeError("max_attempts must be >= 1");
  }
}

std::vector<LabeledImage> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<int> pool = spec.levels;
  if (pool.empty()) {
    pool.resize(static_cast<std::size_t>(spec.n_observers));
    std::iota(pool.begin(), pool.end(), 1);
  }
  Rng rng(spec.seed);
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(spec.n_images));
  for (int i = 0; i < spec.n_images; ++i) {
    out.push_back(generate_one(spec, pool, rng, i));
  }
  return out;
}

fs::path write_dataset(const std::vector<LabeledImage>& data, const fs::path& out_dir) {
  for (const char* sub : {"images", "agreement", "instances"}) {
    fs::create_directories(out_dir / sub);
  }
  std::vector<ManifestRecord> records;
  for (const auto& item : data) {
    ManifestRecord rec;
    rec.id = item.id;
    rec.image = out_dir / "images" / (item.id + ".png");
    rec.agreement = out_dir / "agreement" / (item.id + ".png");
    rec.instances = out_dir / "instances" / (item.id + ".png");
    rec.count = item.count;
    rec.n_observers = item.agreement.n_observers();
    write_image(rec.image, item.image);
    save_agreement_map(rec.agreement, item.agreement);
    save_instance_map(rec.instances, item.instances);
    records.push_back(std::move(rec));
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace relsal::harness
