#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "relsal/raster.hpp"

namespace relsal {

/// Mean saliency of one instance mask.
struct InstanceScore {
  std::uint16_t instance_id = 0;
  double score = 0.0;
  std::size_t pixel_count = 0;
};

struct RankEntry {
  std::uint16_t instance_id = 0;
  double rank = 0.0;

  friend bool operator==(const RankEntry&, const RankEntry&) = default;
};

/// Ranks keyed by instance id, sorted by id. Rank 1 is the most salient object;
/// exact ties share the average of the positions they span.
struct RankVector {
  std::vector<RankEntry> entries;

  [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
  friend bool operator==(const RankVector&, const RankVector&) = default;
};

struct SorResult {
  double rho = 0.0;
  double sor = 0.0;
  std::size_t n_instances = 0;
  bool valid = false;
};

struct DatasetSor {
  double mean_sor = 0.0;
  std::size_t n_valid = 0;
  std::size_t n_excluded = 0;
};

/// Average saliency inside each instance (rank-by-detection score).
/// Throws UndefinedError when the instance map holds no instances.
std::vector<InstanceScore> instance_rank_scores(const SaliencyMap& saliency,
                                                const InstanceMap& instances);

RankVector rank_order(const std::vector<InstanceScore>& scores);

/// Pearson correlation of two rank vectors over the same instance ids.
/// Throws UndefinedError for n < 2 or when either side has zero rank variance,
/// InvariantError when the id sets differ.
double spearman(const RankVector& gt, const RankVector& pred);

/// (rho + 1) / 2; an undefined correlation yields valid == false and NaN fields.
SorResult sor_score(const RankVector& gt, const RankVector& pred);

/// Ground-truth order from the mean observer agreement inside each instance.
RankVector gt_rank_from_agreement(const AgreementMap& agreement, const InstanceMap& instances);

/// Mean SOR over valid results; throws UndefinedError when none is valid.
DatasetSor dataset_sor(const std::vector<SorResult>& results);

}  // namespace relsal
