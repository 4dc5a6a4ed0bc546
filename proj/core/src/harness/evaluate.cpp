#include "relsal/harness/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "relsal/error.hpp"
#include "relsal/image_io.hpp"
#include "relsal/stack.hpp"
#include "relsal/version.hpp"

namespace relsal::harness {
namespace fs = std::filesystem;

ImageRow evaluate_image(const EvalInput& input, const EvalConfig& config) {
  require_same_shape(input.prediction.values(), input.agreement.counts(),
                     ("prediction for " + input.id).c_str());
  require_same_shape(input.instances.labels(), input.agreement.counts(),
                     ("instance map for " + input.id).c_str());
  ImageRow row;
  row.id = input.id;
  const NestedStack stack = build_nested_stack(input.agreement);
  try {
    row.detection =
        evaluate_against_stack(input.prediction, stack, config.beta2, config.thresholds);
  } catch (const UndefinedError&) {
    row.detection.reset();
  }
  if (input.instances.instance_ids().empty()) {
    row.sor = sor_score(RankVector{}, RankVector{});
  } else {
    const RankVector gt = gt_rank_from_agreement(input.agreement, input.instances);
    const RankVector pred = rank_order(instance_rank_scores(input.prediction, input.instances));
    row.sor = sor_score(gt, pred);
  }
  return row;
}

RunReport evaluate_inputs(std::vector<EvalInput> inputs, const EvalConfig& config) {
  if (inputs.empty()) {
    throw RangeError("nothing to evaluate");
  }
  std::sort(inputs.begin(), inputs.end(),
            [](const EvalInput& a, const EvalInput& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    if (inputs[i].id == inputs[i - 1].id) {
      throw InvariantError("duplicate image id " + inputs[i].id);
    }
  }

  RunReport report;
  report.tool_version = kVersion;
  report.config = config;
  report.images.resize(inputs.size());

  unsigned workers = config.workers > 0 ? static_cast<unsigned>(config.workers)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(inputs.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        report.images[i] = evaluate_image(inputs[i], config);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next = inputs.size();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }

  std::vector<BestReport> best;
  std::vector<SorResult> sors;
  for (const auto& row : report.images) {
    if (row.detection) {
      best.push_back(*row.detection);
    }
    sors.push_back(row.sor);
  }
  if (!best.empty()) {
    report.detection = dataset_detection_report(best);
  }
  if (std::any_of(sors.begin(), sors.end(), [](const SorResult& s) { return s.valid; })) {
    report.sor = dataset_sor(sors);
  }
  return report;
}

RunReport run_eval(const DatasetManifest& manifest, const fs::path& pred_dir,
                   const EvalConfig& config,
                   const std::vector<SubitizingPrediction>* subitizing) {
  std::vector<EvalInput> inputs;
  std::vector<SubitizingTruth> truth;
  for (const auto& rec : manifest.records) {
    const fs::path pred_path = pred_dir / (rec.id + ".png");
    if (!fs::is_regular_file(pred_path)) {
      throw IoError("missing prediction for " + rec.id + ": " + pred_path.string());
    }
    EvalInput in{rec.id, load_saliency_map(pred_path),
                 load_agreement_map(rec.agreement, rec.n_observers),
                 load_instance_map(rec.instances)};
    inputs.push_back(std::move(in));
    if (subitizing != nullptr) {
      if (!rec.count) {
        throw IoError("record " + rec.id + " has no count; cannot score subitizing");
      }
      truth.push_back({rec.id, *rec.count});
    }
  }
  RunReport report = evaluate_inputs(std::move(inputs), config);
  if (subitizing != nullptr) {
    report.subitizing = evaluate_subitizing(*subitizing, truth,
                                            CountScheme::from_name(config.scheme),
                                            config.ap_method);
  }
  return report;
}

double mean_slice_auc(const DetectionAggregate& aggregate) {
  if (aggregate.per_slice.empty()) {
    throw UndefinedError("no evaluated slices");
  }
  double s = 0.0;
  for (const auto& m : aggregate.per_slice) {
    s += m.auc;
  }
  return s / static_cast<double>(aggregate.per_slice.size());
}

}  // namespace relsal::harness
