#include "relsal/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>

namespace relsal {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Get>
SliceChoice pick(const std::vector<SliceReport>& rows, Get get, bool maximize) {
  SliceChoice best{rows.front().slice, get(rows.front())};
  for (const auto& r : rows) {
    const double v = get(r);
    if (maximize ? v > best.value : v < best.value) {
      best = {r.slice, v};
    }
  }
  return best;
}

}  // namespace

Curve confusion_sweep(const SaliencyMap& pred, const BinaryMap& gt, int n_thresholds) {
  require_same_shape(pred.values(), gt.bits(), "confusion_sweep");
  if (n_thresholds < 2) {
    throw RangeError("confusion sweep needs at least 2 thresholds, got " +
                     std::to_string(n_thresholds));
  }
  std::vector<double> pos;
  std::vector<double> neg;
  const auto p = pred.values().values();
  const auto g = gt.bits().values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    (g[i] != 0 ? pos : neg).push_back(p[i]);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  Curve curve;
  if (pos.empty()) {
    curve.degeneracy = Degeneracy::kNoPositives;
  } else if (neg.empty()) {
    curve.degeneracy = Degeneracy::kNoNegatives;
  }

  const auto at_or_above = [](const std::vector<double>& sorted, double t) {
    return static_cast<std::size_t>(sorted.end() -
                                    std::lower_bound(sorted.begin(), sorted.end(), t));
  };

  curve.points.reserve(static_cast<std::size_t>(n_thresholds));
  const double steps = static_cast<double>(n_thresholds - 1);
  for (int j = 0; j < n_thresholds; ++j) {
    CurvePoint pt;
    pt.threshold = static_cast<double>(j) / steps;
    pt.tp = at_or_above(pos, pt.threshold);
    pt.fp = at_or_above(neg, pt.threshold);
    pt.fn = pos.size() - pt.tp;
    pt.tn = neg.size() - pt.fp;
    pt.precision = pt.tp + pt.fp == 0
                       ? 1.0
                       : static_cast<double>(pt.tp) / static_cast<double>(pt.tp + pt.fp);
    pt.recall = pos.empty() ? kNaN : static_cast<double>(pt.tp) / static_cast<double>(pos.size());
    pt.tpr = pt.recall;
    pt.fpr = neg.empty() ? kNaN : static_cast<double>(pt.fp) / static_cast<double>(neg.size());
    curve.points.push_back(pt);
  }
  return curve;
}

double auc(const Curve& curve) {
  if (curve.degenerate()) {
    throw UndefinedError("ROC area undefined: ground truth slice has a single class");
  }
  if (curve.points.size() < 2) {
    throw RangeError("ROC area needs at least 2 curve points");
  }
  std::vector<std::pair<double, double>> roc;
  roc.reserve(curve.points.size() + 2);
  roc.emplace_back(0.0, 0.0);
  for (const auto& pt : curve.points) {
    roc.emplace_back(pt.fpr, pt.tpr);
  }
  roc.emplace_back(1.0, 1.0);
  std::sort(roc.begin(), roc.end());
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].first - roc[i - 1].first) * 0.5 * (roc[i].second + roc[i - 1].second);
  }
  return area;
}

FMeasures f_measures(const Curve& curve, double beta2) {
  if (beta2 <= 0.0) {
    throw RangeError("beta^2 must be positive");
  }
  if (curve.degeneracy == Degeneracy::kNoPositives) {
    throw UndefinedError("F-measure undefined: ground truth slice has no positives");
  }
  if (curve.points.empty()) {
    throw RangeError("F-measure needs a non-empty curve");
  }
  std::vector<double> fs;
  fs.reserve(curve.points.size());
  for (const auto& pt : curve.points) {
    const double denom = beta2 * pt.precision + pt.recall;
    const bool none_predicted = pt.tp + pt.fp == 0;
    fs.push_back(none_predicted || denom <= 0.0
                     ? 0.0
                     : (1.0 + beta2) * pt.precision * pt.recall / denom);
  }
  FMeasures out;
  out.max_f = *std::max_element(fs.begin(), fs.end());
  double sum = 0.0;
  for (const double f : fs) {
    sum += f;
  }
  out.avg_f = sum / static_cast<double>(fs.size());
  out.med_f = median(std::move(fs));
  return out;
}

double mae(const SaliencyMap& pred, const BinaryMap& gt) {
  require_same_shape(pred.values(), gt.bits(), "mae");
  const auto p = pred.values().values();
  const auto g = gt.bits().values();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sum += std::abs(p[i] - static_cast<double>(g[i]));
  }
  return sum / static_cast<double>(p.size());
}

const SliceReport* BestReport::find(int k) const noexcept {
  for (const auto& r : per_slice) {
    if (r.slice == k) {
      return &r;
    }
  }
  return nullptr;
}

BestReport evaluate_against_stack(const SaliencyMap& pred, const NestedStack& stack,
                                  double beta2, int n_thresholds) {
  require_same_shape(pred.values(), stack.slice(1).bits(), "evaluate_against_stack");
  BestReport report;
  for (int k = 1; k <= stack.n_observers(); ++k) {
    const BinaryMap& gt = stack.slice(k);
    const Curve curve = confusion_sweep(pred, gt, n_thresholds);
    if (curve.degenerate()) {
      report.degenerate_slices.push_back(k);
      continue;
    }
    const FMeasures f = f_measures(curve, beta2);
    report.per_slice.push_back({k, auc(curve), f.max_f, f.med_f, f.avg_f, mae(pred, gt)});
  }
  if (report.per_slice.empty()) {
    throw UndefinedError("every ground-truth slice is degenerate (single-class)");
  }
  report.best_auc = pick(report.per_slice, [](const SliceReport& r) { return r.auc; }, true);
  report.best_maxf = pick(report.per_slice, [](const SliceReport& r) { return r.max_f; }, true);
  report.min_mae = pick(report.per_slice, [](const SliceReport& r) { return r.mae; }, false);
  return report;
}

DetectionAggregate dataset_detection_report(const std::vector<BestReport>& per_image) {
  if (per_image.empty()) {
    throw UndefinedError("detection report needs at least one image");
  }
  DetectionAggregate agg;
  agg.n_images = per_image.size();
  const double n = static_cast<double>(per_image.size());

  std::map<int, SliceMean> slices;
  for (const auto& img : per_image) {
    const SliceReport* at_maxf = img.find(img.best_maxf.slice);
    agg.per_image_best.auc += img.best_auc.value;
    agg.per_image_best.max_f += img.best_maxf.value;
    agg.per_image_best.med_f += at_maxf->med_f;
    agg.per_image_best.avg_f += at_maxf->avg_f;
    agg.per_image_best.mae += img.min_mae.value;
    for (const auto& r : img.per_slice) {
      SliceMean& m = slices[r.slice];
      m.slice = r.slice;
      ++m.n_images;
      m.auc += r.auc;
      m.max_f += r.max_f;
      m.med_f += r.med_f;
      m.avg_f += r.avg_f;
      m.mae += r.mae;
    }
  }
  agg.per_image_best.auc /= n;
  agg.per_image_best.max_f /= n;
  agg.per_image_best.med_f /= n;
  agg.per_image_best.avg_f /= n;
  agg.per_image_best.mae /= n;

  std::vector<SliceReport> means;
  for (auto& [k, m] : slices) {
    const double c = static_cast<double>(m.n_images);
    m.auc /= c;
    m.max_f /= c;
    m.med_f /= c;
    m.avg_f /= c;
    m.mae /= c;
    agg.per_slice.push_back(m);
    means.push_back({k, m.auc, m.max_f, m.med_f, m.avg_f, m.mae});
  }
  agg.global_best_auc = pick(means, [](const SliceReport& r) { return r.auc; }, true);
  agg.global_best_maxf = pick(means, [](const SliceReport& r) { return r.max_f; }, true);
  agg.global_min_mae = pick(means, [](const SliceReport& r) { return r.mae; }, false);
  const auto row = [&](int k) {
    return *std::find_if(means.begin(), means.end(),
                         [k](const SliceReport& r) { return r.slice == k; });
  };
  const SliceReport fbest = row(agg.global_best_maxf.slice);
  agg.global_best = {agg.global_best_auc.value, fbest.max_f, fbest.med_f, fbest.avg_f,
                     agg.global_min_mae.value};
  return agg;
}

}  // namespace relsal
