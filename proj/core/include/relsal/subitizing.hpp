#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace relsal {

/// Ordered count classes; the last one is open-ended ("4+").
class CountScheme {
 public:
  /// {0, 1, 2, 3, 4+}
  static CountScheme sos();
  /// {1, 2, 3, 4+}
  static CountScheme pascal_s();
  /// Parses "sos" or "pascals".
  static CountScheme from_name(const std::string& name);

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] int min_count() const noexcept { return min_count_; }

 private:
  CountScheme(std::string name, int min_count, int open_from);

  std::string name_;
  int min_count_;
  std::vector<std::string> labels_;
};

/// Index into scheme.labels(). Throws RangeError for counts below the scheme's minimum.
std::size_t count_to_class(int count, const CountScheme& scheme);

struct SubitizingPrediction {
  std::string image_id;
  std::vector<double> confidences;  // one per scheme class
};

enum class ApMethod { kVoc07, kContinuous };

ApMethod ap_method_from_name(const std::string& name);
const char* ap_method_name(ApMethod method);

/// Average precision of a one-vs-rest ranking by descending confidence. Equal
/// confidences keep their input order. Throws UndefinedError without positives.
double average_precision(const std::vector<double>& confidences,
                         const std::vector<bool>& positives, ApMethod method = ApMethod::kVoc07);

struct ClassAp {
  std::string label;
  double ap = 0.0;
  std::size_t count = 0;
};

struct ApReport {
  std::vector<ClassAp> per_class;
  double mean_ap = 0.0;
  double weighted_ap = 0.0;
  /// Classes left out because no ground-truth image falls into them.
  std::vector<std::string> skipped_classes;
};

/// Unweighted and count-weighted mean over classes. Throws on an empty class set.
ApReport subitizing_report(const std::vector<ClassAp>& per_class);

/// count / total per label, in input order.
std::vector<std::pair<std::string, double>> class_distribution(
    const std::vector<std::pair<std::string, std::size_t>>& counts);

struct SubitizingTruth {
  std::string image_id;
  int count = 0;
};

/// One-vs-rest AP per scheme class. Images are ordered by id before ranking so
/// that confidence ties resolve by image id.
ApReport evaluate_subitizing(const std::vector<SubitizingPrediction>& predictions,
                             const std::vector<SubitizingTruth>& truth, const CountScheme& scheme,
                             ApMethod method = ApMethod::kVoc07);

}  // namespace relsal
