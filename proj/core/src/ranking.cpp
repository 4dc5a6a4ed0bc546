#include "relsal/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace relsal {

std::vector<InstanceScore> instance_rank_scores(const SaliencyMap& saliency,
                                                const InstanceMap& instances) {
  require_same_shape(saliency.values(), instances.labels(), "instance_rank_scores");
  const auto& ids = instances.instance_ids();
  if (ids.empty()) {
    throw UndefinedError("instance map contains no salient objects");
  }
  std::vector<double> sums(65536, 0.0);
  std::vector<std::size_t> counts(65536, 0);
  const auto labels = instances.labels().values();
  const auto values = saliency.values().values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      sums[labels[i]] += values[i];
      ++counts[labels[i]];
    }
  }
  std::vector<InstanceScore> scores;
  scores.reserve(ids.size());
  for (const auto id : ids) {
    scores.push_back({id, sums[id] / static_cast<double>(counts[id]), counts[id]});
  }
  return scores;
}

RankVector rank_order(const std::vector<InstanceScore>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a].score > scores[b].score;
  });

  RankVector out;
  out.entries.resize(scores.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]].score == scores[order[i]].score) {
      ++j;
    }
    // Positions i..j-1 (0-based) share the mean of ranks i+1..j.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t p = i; p < j; ++p) {
      out.entries[order[p]] = {scores[order[p]].instance_id, rank};
    }
    i = j;
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const RankEntry& a, const RankEntry& b) { return a.instance_id < b.instance_id; });
  return out;
}

double spearman(const RankVector& gt, const RankVector& pred) {
  const std::size_t n = gt.size();
  if (pred.size() != n) {
    throw InvariantError("rank vectors cover different instance sets (" + std::to_string(n) +
                         " vs " + std::to_string(pred.size()) + " instances)");
  }
  if (n < 2) {
    throw UndefinedError("rank correlation needs at least 2 instances, got " +
                         std::to_string(n));
  }
  auto by_id = [](const RankVector& v) {
    std::vector<RankEntry> e = v.entries;
    std::sort(e.begin(), e.end(),
              [](const RankEntry& a, const RankEntry& b) { return a.instance_id < b.instance_id; });
    return e;
  };
  const auto a = by_id(gt);
  const auto b = by_id(pred);
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].instance_id != b[i].instance_id) {
      throw InvariantError("rank vectors cover different instance ids");
    }
  }
  // Tie-free: both sides are permutations of 1..n, use 1 - 6 sum(d^2) / (n (n^2 - 1)).
  const auto is_permutation = [n](const std::vector<RankEntry>& e) {
    std::vector<bool> seen(n + 1, false);
    for (const auto& r : e) {
      const double k = r.rank;
      if (k != std::floor(k) || k < 1.0 || k > static_cast<double>(n) ||
          seen[static_cast<std::size_t>(k)]) {
        return false;
      }
      seen[static_cast<std::size_t>(k)] = true;
    }
    return true;
  };
  if (is_permutation(a) && is_permutation(b)) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = a[i].rank - b[i].rank;
      d2 += d * d;
    }
    const auto nd = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nd * (nd * nd - 1.0));
  }

  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i].rank;
    mean_b += b[i].rank;
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i].rank - mean_a;
    const double db = b[i].rank - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw UndefinedError("rank correlation undefined: one ranking is fully tied");
  }
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

SorResult sor_score(const RankVector& gt, const RankVector& pred) {
  SorResult r;
  r.n_instances = gt.size();
  try {
    r.rho = spearman(gt, pred);
    r.sor = 0.5 * (r.rho + 1.0);
    r.valid = true;
  } catch (const UndefinedError&) {
    r.rho = std::numeric_limits<double>::quiet_NaN();
    r.sor = std::numeric_limits<double>::quiet_NaN();
    r.valid = false;
  }
  return r;
}

RankVector gt_rank_from_agreement(const AgreementMap& agreement, const InstanceMap& instances) {
  require_same_shape(agreement.counts(), instances.labels(), "gt_rank_from_agreement");
  const auto& ids = instances.instance_ids();
  if (ids.empty()) {
    throw UndefinedError("instance map contains no salient objects");
  }
  // Integer sums per instance keep ties exact.
  std::vector<std::uint64_t> sums(65536, 0);
  std::vector<std::size_t> counts(65536, 0);
  const auto labels = instances.labels().values();
  const auto values = agreement.counts().values();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) {
      sums[labels[i]] += values[i];
      ++counts[labels[i]];
    }
  }
  std::vector<InstanceScore> scores;
  scores.reserve(ids.size());
  for (const auto id : ids) {
    const double mean = static_cast<double>(sums[id]) / static_cast<double>(counts[id]);
    scores.push_back({id, mean / agreement.n_observers(), counts[id]});
  }
  return rank_order(scores);
}

DatasetSor dataset_sor(const std::vector<SorResult>& results) {
  DatasetSor out;
  double total = 0.0;
  for (const auto& r : results) {
    if (r.valid) {
      total += r.sor;
      ++out.n_valid;
    } else {
      ++out.n_excluded;
    }
  }
  if (out.n_valid == 0) {
    throw UndefinedError("no image has a defined SOR (all have fewer than 2 rankable objects)");
  }
  out.mean_sor = total / static_cast<double>(out.n_valid);
  return out;
}

}  // namespace relsal
