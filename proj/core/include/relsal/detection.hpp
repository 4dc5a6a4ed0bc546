#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "relsal/raster.hpp"

namespace relsal {

inline constexpr double kDefaultBeta2 = 0.3;
inline constexpr int kDefaultThresholds = 256;

struct CurvePoint {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double precision = 0.0;  // 1.0 when nothing is predicted positive
  double recall = 0.0;     // NaN when the ground truth has no positives
  double tpr = 0.0;        // NaN when the ground truth has no positives
  double fpr = 0.0;        // NaN when the ground truth has no negatives
};

enum class Degeneracy { kNone, kNoPositives, kNoNegatives };

/// Confusion counts at n_thresholds evenly spaced levels {0, 1/(n-1), ..., 1};
/// a pixel is predicted positive when its value is >= the threshold.
struct Curve {
  std::vector<CurvePoint> points;
  Degeneracy degeneracy = Degeneracy::kNone;

  [[nodiscard]] bool degenerate() const noexcept { return degeneracy != Degeneracy::kNone; }
};

Curve confusion_sweep(const SaliencyMap& pred, const BinaryMap& gt,
                      int n_thresholds = kDefaultThresholds);

/// Trapezoidal area under the ROC curve with (0,0) and (1,1) appended.
/// Throws UndefinedError for a degenerate curve.
double auc(const Curve& curve);

struct FMeasures {
  double max_f = 0.0;
  double med_f = 0.0;
  double avg_f = 0.0;
};

/// F = (1+b2) P R / (b2 P + R) at each threshold (0 when the denominator vanishes).
FMeasures f_measures(const Curve& curve, double beta2 = kDefaultBeta2);

/// Mean |pred - gt| over all pixels.
double mae(const SaliencyMap& pred, const BinaryMap& gt);

struct SliceReport {
  int slice = 0;
  double auc = 0.0;
  double max_f = 0.0;
  double med_f = 0.0;
  double avg_f = 0.0;
  double mae = 0.0;
};

struct SliceChoice {
  int slice = 0;
  double value = 0.0;
};

struct BestReport {
  SliceChoice best_auc;
  SliceChoice best_maxf;
  SliceChoice min_mae;
  std::vector<SliceReport> per_slice;     // non-degenerate slices, ascending k
  std::vector<int> degenerate_slices;     // skipped, ascending k

  /// The per-slice row for slice k, if that slice was evaluated.
  [[nodiscard]] const SliceReport* find(int k) const noexcept;
};

/// Evaluate pred against every slice of the stack. Throws UndefinedError when
/// every slice is degenerate.
BestReport evaluate_against_stack(const SaliencyMap& pred, const NestedStack& stack,
                                  double beta2 = kDefaultBeta2,
                                  int n_thresholds = kDefaultThresholds);

struct SliceMean {
  int slice = 0;
  std::size_t n_images = 0;
  double auc = 0.0;
  double max_f = 0.0;
  double med_f = 0.0;
  double avg_f = 0.0;
  double mae = 0.0;
};

/// Table-2 style row. med_f and avg_f come from the slice that maximizes max_f.
struct DetectionSummary {
  double auc = 0.0;
  double max_f = 0.0;
  double med_f = 0.0;
  double avg_f = 0.0;
  double mae = 0.0;
};

struct DetectionAggregate {
  std::size_t n_images = 0;
  /// Mean over images of each image's own best slice.
  DetectionSummary per_image_best;
  /// Per-slice means over the images where that slice is non-degenerate.
  std::vector<SliceMean> per_slice;
  /// Best slice of the per-slice means, one slice for the whole dataset.
  SliceChoice global_best_auc;
  SliceChoice global_best_maxf;
  SliceChoice global_min_mae;
  DetectionSummary global_best;
};

/// Throws UndefinedError on empty input.
DetectionAggregate dataset_detection_report(const std::vector<BestReport>& per_image);

}  // namespace relsal
