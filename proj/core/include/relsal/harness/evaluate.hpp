#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relsal/detection.hpp"
#include "relsal/harness/manifest.hpp"
#include "relsal/ranking.hpp"
#include "relsal/subitizing.hpp"

namespace relsal::harness {

struct EvalConfig {
  double beta2 = kDefaultBeta2;
  int thresholds = kDefaultThresholds;
  ApMethod ap_method = ApMethod::kVoc07;
  std::string scheme = "sos";
  /// 0 picks std::thread::hardware_concurrency().
  int workers = 0;
};

/// What run_eval needs per image.
struct EvalInput {
  std::string id;
  SaliencyMap prediction;
  AgreementMap agreement;
  InstanceMap instances;
};

struct ImageRow {
  std::string id;
  /// Absent when every slice of the image is degenerate.
  std::optional<BestReport> detection;
  SorResult sor;
};

struct RunReport {
  std::string tool_version;
  EvalConfig config;
  std::vector<ImageRow> images;  // sorted by id
  /// Absent when no image has a non-degenerate slice.
  std::optional<DetectionAggregate> detection;
  /// Absent when no image yields a defined rank correlation.
  std::optional<DatasetSor> sor;
  std::optional<ApReport> subitizing;
};

ImageRow evaluate_image(const EvalInput& input, const EvalConfig& config);

/// Evaluates every input on a worker pool and reduces the rows in id order.
RunReport evaluate_inputs(std::vector<EvalInput> inputs, const EvalConfig& config);

/// Loads <pred_dir>/<id>.png for each manifest record and evaluates it against the
/// record's annotations. When subitizing predictions are supplied, every record must
/// carry a count.
RunReport run_eval(const DatasetManifest& manifest, const std::filesystem::path& pred_dir,
                   const EvalConfig& config,
                   const std::vector<SubitizingPrediction>* subitizing = nullptr);

/// Per-slice mean AUC averaged over the evaluated slices of an aggregate.
double mean_slice_auc(const DetectionAggregate& aggregate);

}  // namespace relsal::harness
