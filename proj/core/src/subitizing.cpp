#include "relsal/subitizing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "relsal/error.hpp"

namespace relsal {

CountScheme::CountScheme(std::string name, int min_count, int open_from)
    : name_(std::move(name)), min_count_(min_count) {
  for (int c = min_count; c < open_from; ++c) {
    labels_.push_back(std::to_string(c));
  }
  labels_.push_back(std::to_string(open_from) + "+");
}

CountScheme CountScheme::sos() { return {"sos", 0, 4}; }

CountScheme CountScheme::pascal_s() { return {"pascals", 1, 4}; }

CountScheme CountScheme::from_name(const std::string& name) {
  if (name == "sos") {
    return sos();
  }
  if (name == "pascals") {
    return pascal_s();
  }
  throw RangeError("unknown count scheme '" + name + "' (expected sos or pascals)");
}

std::size_t count_to_class(int count, const CountScheme& scheme) {
  if (count < scheme.min_count()) {
    throw RangeError("count " + std::to_string(count) + " has no class in the " + scheme.name() +
                     " scheme");
  }
  return std::min(static_cast<std::size_t>(count - scheme.min_count()), scheme.size() - 1);
}

ApMethod ap_method_from_name(const std::string& name) {
  if (name == "voc07") {
    return ApMethod::kVoc07;
  }
  if (name == "continuous") {
    return ApMethod::kContinuous;
  }
  throw RangeError("unknown AP method '" + name + "' (expected voc07 or continuous)");
}

const char* ap_method_name(ApMethod method) {
  return method == ApMethod::kVoc07 ? "voc07" : "continuous";
}

double average_precision(const std::vector<double>& confidences,
                         const std::vector<bool>& positives, ApMethod method) {
  if (confidences.size() != positives.size()) {
    throw RangeError("confidence and label lists differ in length");
  }
  const auto n_pos =
      static_cast<std::size_t>(std::count(positives.begin(), positives.end(), true));
  if (n_pos == 0) {
    throw UndefinedError("average precision undefined without positives");
  }
  std::vector<std::size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return confidences[a] > confidences[b];
  });

  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (positives[order[r]]) {
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(r + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
  }

  if (method == ApMethod::kContinuous) {
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (positives[order[r]]) {
        ap += precision[r];
      }
    }
    return ap / static_cast<double>(n_pos);
  }

  double ap = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    double best = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (recall[r] >= t) {
        best = std::max(best, precision[r]);
      }
    }
    ap += best;
  }
  return ap / 11.0;
}

ApReport subitizing_report(const std::vector<ClassAp>& per_class) {
  if (per_class.empty()) {
    throw UndefinedError("subitizing report needs at least one class");
  }
  ApReport report;
  report.per_class = per_class;
  double sum = 0.0;
  double weighted = 0.0;
  std::size_t total = 0;
  for (const auto& c : per_class) {
    sum += c.ap;
    weighted += c.ap * static_cast<double>(c.count);
    total += c.count;
  }
  report.mean_ap = sum / static_cast<double>(per_class.size());
  report.weighted_ap = total == 0 ? report.mean_ap : weighted / static_cast<double>(total);
  return report;
}

std::vector<std::pair<std::string, double>> class_distribution(
    const std::vector<std::pair<std::string, std::size_t>>& counts) {
  std::size_t total = 0;
  for (const auto& [label, c] : counts) {
    total += c;
  }
  if (counts.empty() || total == 0) {
    throw UndefinedError("class distribution needs a positive total count");
  }
  std::vector<std::pair<std::string, double>> out;
  out.reserve(counts.size());
  for (const auto& [label, c] : counts) {
    out.emplace_back(label, static_cast<double>(c) / static_cast<double>(total));
  }
  return out;
}

ApReport evaluate_subitizing(const std::vector<SubitizingPrediction>& predictions,
                             const std::vector<SubitizingTruth>& truth, const CountScheme& scheme,
                             ApMethod method) {
  std::map<std::string, int> gt;
  for (const auto& t : truth) {
    if (!gt.emplace(t.image_id, t.count).second) {
      throw InvariantError("duplicate ground-truth row for image '" + t.image_id + "'");
    }
  }
  std::vector<const SubitizingPrediction*> rows;
  rows.reserve(predictions.size());
  for (const auto& p : predictions) {
    if (p.confidences.size() != scheme.size()) {
      throw ShapeError("image '" + p.image_id + "' has " + std::to_string(p.confidences.size()) +
                       " confidences, scheme " + scheme.name() + " needs " +
                       std::to_string(scheme.size()));
    }
    for (const double c : p.confidences) {
      if (!std::isfinite(c)) {
        throw RangeError("image '" + p.image_id + "' has a non-finite confidence");
      }
    }
    if (!gt.contains(p.image_id)) {
      throw InvariantError("no ground-truth count for image '" + p.image_id + "'");
    }
    rows.push_back(&p);
  }
  if (rows.size() != gt.size()) {
    throw InvariantError("ground truth lists " + std::to_string(gt.size()) +
                         " images but predictions cover " + std::to_string(rows.size()));
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i]->image_id == rows[i - 1]->image_id) {
      throw InvariantError("duplicate prediction row for image '" + rows[i]->image_id + "'");
    }
  }

  std::vector<std::size_t> classes;
  classes.reserve(rows.size());
  for (const auto* r : rows) {
    classes.push_back(count_to_class(gt.at(r->image_id), scheme));
  }

  std::vector<ClassAp> per_class;
  std::vector<std::string> skipped;
  for (std::size_t c = 0; c < scheme.size(); ++c) {
    std::vector<double> conf;
    std::vector<bool> pos;
    std::size_t count = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      conf.push_back(rows[i]->confidences[c]);
      pos.push_back(classes[i] == c);
      count += classes[i] == c ? 1 : 0;
    }
    if (count == 0) {
      skipped.push_back(scheme.labels()[c]);
      continue;
    }
    per_class.push_back({scheme.labels()[c], average_precision(conf, pos, method), count});
  }
  ApReport report = subitizing_report(per_class);
  report.skipped_classes = std::move(skipped);
  return report;
}

}  // namespace relsal
