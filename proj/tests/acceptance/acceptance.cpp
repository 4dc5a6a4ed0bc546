// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: relsal_acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"
#include "../support/oracles.hpp"
#include "cli.hpp"
#include "relsal/detection.hpp"
#include "relsal/harness/evaluate.hpp"
#include "relsal/harness/synthetic.hpp"
#include "relsal/harness/toy.hpp"
#include "relsal/net/model.hpp"
#include "relsal/net/pca.hpp"
#include "relsal/ranking.hpp"
#include "relsal/stack.hpp"
#include "relsal/subitizing.hpp"

namespace relsal::acceptance {
namespace {

using testing::uniform_int;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> run;
};

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(2) << v;
  return s.str();
}

// Value as printed at the table's two-decimal precision, within +-0.005 of the printed figure.
bool matches_printed(double value, double printed) {
  return std::abs(value - printed) <= 0.005 && fixed(value, 2) == fixed(printed, 2);
}

Outcome four_class_mean() {
  const auto r = subitizing_report(
      {{"1", 0.62, 0}, {"2", 0.42, 0}, {"3", 0.20, 0}, {"4+", 0.55, 0}});
  const bool pass = std::abs(r.mean_ap - 0.4475) < 1e-12 && matches_printed(r.mean_ap, 0.45);
  return {pass, "mean AP " + fixed(r.mean_ap, 4) + " prints " + fixed(r.mean_ap, 2)};
}

Outcome weighted_five_class() {
  const std::vector<std::size_t> counts{338, 617, 219, 137, 69};
  const std::vector<std::string> labels{"0", "1", "2", "3", "4+"};
  const auto report = [&](const std::vector<double>& aps) {
    std::vector<ClassAp> per_class;
    for (std::size_t i = 0; i < aps.size(); ++i) {
      per_class.push_back({labels[i], aps[i], counts[i]});
    }
    return subitizing_report(per_class);
  };
  const auto ours = report({0.95, 0.92, 0.61, 0.59, 0.67});
  const auto base = report({0.93, 0.90, 0.51, 0.48, 0.65});
  const bool pass = matches_printed(ours.weighted_ap, 0.83) &&
                    matches_printed(base.mean_ap, 0.69) &&
                    matches_printed(base.weighted_ap, 0.79);
  return {pass, "weighted " + fixed(ours.weighted_ap, 3) + "; baseline mean " +
                    fixed(base.mean_ap, 3) + " weighted " + fixed(base.weighted_ap, 3)};
}

Outcome count_distribution() {
  const std::vector<std::size_t> counts{300, 227, 136, 72, 43, 28, 18, 26};
  const std::vector<double> printed{0.35, 0.27, 0.16, 0.08, 0.05, 0.03, 0.02, 0.03};
  std::vector<std::pair<std::string, std::size_t>> in;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    in.emplace_back(std::to_string(i + 1), counts[i]);
  }
  const auto d = class_distribution(in);
  bool pass = d.size() == printed.size();
  std::string shares;
  double worst = 0.0;
  for (std::size_t i = 0; pass && i < d.size(); ++i) {
    pass = std::abs(d[i].second - printed[i]) <= 0.005;
    worst = std::max(worst, std::abs(d[i].second - printed[i]));
    shares += (i == 0 ? "" : " ") + fixed(d[i].second, 2);
  }
  return {pass, shares + " (max deviation " + fixed(worst, 4) + ")"};
}

Outcome stack_invariants() {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 1000; ++trial) {
    const int w = uniform_int(rng, 1, 64);
    const int h = uniform_int(rng, 1, 64);
    const auto a = testing::random_agreement(rng, w, h, 12);
    const auto stack = build_nested_stack(a);
    const std::string where = "map " + std::to_string(trial);
    if (!stack.is_nested()) {
      return {false, where + " not nested"};
    }
    for (std::size_t i = 0; i < a.counts().size(); ++i) {
      int sum = 0;
      for (int k = 1; k <= 12; ++k) {
        sum += stack.slice(k).bits()[i];
      }
      if (sum != a.counts()[i]) {
        return {false, where + " slice sum differs at pixel " + std::to_string(i)};
      }
    }
    if (!(collapse_stack(stack) == a)) {
      return {false, where + " roundtrip differs"};
    }
    for (int k = 1; k <= 12; ++k) {
      if (!(stack.slice(k) == threshold_agreement(a, k))) {
        return {false, where + " slice " + std::to_string(k) + " differs from threshold"};
      }
    }
  }
  return {true, "1000 maps, N=12, sizes 1..64"};
}

RankVector ranks_from_scores(const std::vector<double>& scores) {
  std::vector<InstanceScore> s;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s.push_back({static_cast<std::uint16_t>(i + 1), scores[i], 1});
  }
  return rank_order(s);
}

Outcome sor_enumeration() {
  std::size_t orders = 0;
  double worst = 0.0;
  for (int n = 2; n <= 5; ++n) {
    std::vector<double> gt_scores(static_cast<std::size_t>(n));
    std::iota(gt_scores.rbegin(), gt_scores.rend(), 1.0);  // instance 1 most salient
    const auto gt = ranks_from_scores(gt_scores);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 1);
    do {
      // perm[i] is the predicted rank of instance i + 1.
      std::vector<double> scores;
      double d2 = 0.0;
      for (int i = 0; i < n; ++i) {
        scores.push_back(static_cast<double>(n + 1 - perm[static_cast<std::size_t>(i)]));
        const double d = perm[static_cast<std::size_t>(i)] - (i + 1);
        d2 += d * d;
      }
      const double rho = 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0));
      const auto got = sor_score(gt, ranks_from_scores(scores));
      if (!got.valid) {
        return {false, "undefined SOR for a tie-free order"};
      }
      worst = std::max(worst, std::abs(got.sor - (rho + 1.0) / 2.0));
      ++orders;
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<double> reversed(gt_scores.rbegin(), gt_scores.rend());
    if (sor_score(gt, gt).sor != 1.0 || sor_score(gt, ranks_from_scores(reversed)).sor != 0.0) {
      return {false, "identical/reversed order wrong for n=" + std::to_string(n)};
    }
  }
  return {worst == 0.0, std::to_string(orders) + " orders, n=2..5, max |diff| " + sci(worst)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(606);
  double worst_auc = 0.0;
  double worst_ap = 0.0;
  int pairs = 0;
  while (pairs < 200) {
    const int w = uniform_int(rng, 1, 8);
    const int h = uniform_int(rng, 1, 8);
    const int n_thr = uniform_int(rng, 2, 64);
    const auto pred = testing::grid_prediction(rng, w, h, n_thr);
    const auto gt = testing::random_binary(rng, w, h, testing::uniform_real(rng, 0.1, 0.9));
    const std::size_t pos = gt.count_ones();
    if (pos == 0 || pos == gt.bits().size()) {
      continue;  // degenerate slice: no oracle value exists
    }
    ++pairs;
    const auto curve = confusion_sweep(pred, gt, n_thr);
    worst_auc = std::max(worst_auc, std::abs(auc(curve) - testing::mann_whitney(pred, gt)));

    const double beta2 = pairs % 2 == 0 ? 0.3 : 1.0;
    const auto f = f_measures(curve, beta2);
    const auto want = testing::pixel_loop_f(pred, gt, n_thr, beta2);
    if (f.max_f != want.max_f || f.med_f != want.med_f || f.avg_f != want.avg_f) {
      return {false, "F-measure differs from pixel loop on pair " + std::to_string(pairs)};
    }
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < gt.bits().size(); ++i) {
      abs_sum += std::abs(pred.values()[i] - static_cast<double>(gt.bits()[i]));
    }
    if (mae(pred, gt) != abs_sum / static_cast<double>(gt.bits().size())) {
      return {false, "MAE differs from pixel loop on pair " + std::to_string(pairs)};
    }

    const auto& conf = pred.values().values();
    const std::vector<double> c(conf.begin(), conf.end());
    std::vector<bool> positives;
    for (const auto b : gt.bits().values()) {
      positives.push_back(b != 0);
    }
    worst_ap = std::max(worst_ap, std::abs(average_precision(c, positives, ApMethod::kVoc07) -
                                           testing::oracle_voc07(c, positives)));
    worst_ap =
        std::max(worst_ap, std::abs(average_precision(c, positives, ApMethod::kContinuous) -
                                    testing::oracle_continuous(c, positives)));
  }
  const bool pass = worst_auc <= 1e-9 && worst_ap <= 1e-12;
  return {pass, "200 pairs, max AUC error " + sci(worst_auc) + ", max AP error " +
                    sci(worst_ap) + ", F and MAE exact"};
}

Outcome gradients() {
  using namespace net;
  ModelConfig c;
  c.atrous = true;
  c.atrous_rates = {1};  // a 16x16 input leaves a 2x2 deepest feature
  std::mt19937_64 rng(7007);
  auto p = init_params<double>(c, 71);
  testing::randomize_biases(p, rng);
  const auto a = testing::random_agreement(rng, 16, 16, c.n_observers);
  const auto image = testing::random_tensor<double>(rng, 3, 16, 16, 0.0, 1.0);
  const auto targets =
      make_targets<double>(build_nested_stack(a), normalize_saliency(a), c, 1.0);
  const std::vector<double> lambdas{1.0, 1.0, 1.0};
  const auto grads = backward(forward(image, p), p, targets, lambdas);
  const auto saliency = testing::check_params(
      p, grads, [&] { return total_loss(forward(image, p), targets, lambdas).total; },
      [](const std::string& n) { return !n.starts_with("subitizer."); });

  const int cls = 3;
  const auto sub_grads = subitize_backward(subitize(image, p), p, cls, true);
  const auto subitizer = testing::check_params(
      p, sub_grads,
      [&] {
        const auto t = subitize(image, p);
        return subitize_loss(t.intermediate, t.final, cls);
      },
      [](const std::string& n) { return n.starts_with("subitizer."); });

  std::set<std::string> covered(saliency.tensors.begin(), saliency.tensors.end());
  covered.insert(subitizer.tensors.begin(), subitizer.tensors.end());
  std::size_t total = 0;
  std::string missing;
  for_each_tensor(p, [&](const std::string& name, std::vector<double>&, const std::vector<int>&) {
    ++total;
    if (covered.count(name) == 0) {
      missing += " " + name;
    }
  });
  const double worst = std::max(saliency.worst_error, subitizer.worst_error);
  const auto& at = saliency.worst_error >= subitizer.worst_error ? saliency : subitizer;
  const bool pass = missing.empty() && worst < testing::kGradTolerance;
  return {pass, std::to_string(covered.size()) + "/" + std::to_string(total) + " tensors, " +
                    std::to_string(saliency.checked + subitizer.checked) +
                    " entries, worst rel error " + sci(worst) + " at " + at.worst_name +
                    (missing.empty() ? "" : "; unchecked:" + missing)};
}

Outcome toy_training() {
  harness::ToyConfig config;
  const auto data = harness::generate_synthetic(harness::default_toy_spec(config.train.seed));
  const auto result = harness::train_toy(data, config);
  const double initial = result.log.epochs.front().total;
  double best = initial;
  for (const auto& e : result.log.epochs) {
    best = std::min(best, e.total);
  }
  const auto report =
      harness::evaluate_inputs(harness::prediction_inputs(result.checkpoint, data), {});
  const double sor = report.sor ? report.sor->mean_sor : 0.0;
  const double slice_auc = harness::mean_slice_auc(*report.detection);
  const double ratio = best / initial;
  const bool pass = ratio < 0.25 && sor >= 0.9 && slice_auc >= 0.9;
  return {pass, std::to_string(data.size()) + " images, " +
                    std::to_string(result.log.epochs.size() - 1) + " epochs, loss ratio " +
                    fixed(ratio, 4) + ", SOR " + fixed(sor, 4) + ", mean slice AUC " +
                    fixed(slice_auc, 4)};
}

Outcome self_evaluation() {
  harness::SyntheticSpec spec;
  spec.n_images = 40;
  spec.seed = 99;
  std::vector<harness::EvalInput> inputs;
  const auto data = harness::generate_synthetic(spec);
  for (const auto& d : data) {
    inputs.push_back({d.id, normalize_saliency(d.agreement), d.agreement, d.instances});
  }
  const auto report = harness::evaluate_inputs(inputs, {});
  if (!report.sor || report.sor->mean_sor != 1.0) {
    return {false, "dataset SOR is not 1"};
  }
  std::size_t slices = 0;
  for (std::size_t i = 0; i < report.images.size(); ++i) {
    const auto& row = report.images[i];
    if (row.sor.valid && row.sor.sor != 1.0) {
      return {false, row.id + " SOR " + fixed(row.sor.sor, 6)};
    }
    // The slice whose support equals the agreement support (every marked pixel) is k = 1.
    // Brute force over all slices of MAE(normalized agreement, slice k), ties toward low k.
    const auto& a = inputs[i].agreement;
    int want = 0;
    double want_mae = 0.0;
    for (const auto& s : row.detection->per_slice) {
      if (s.auc != 1.0) {
        return {false, row.id + " slice " + std::to_string(s.slice) + " AUC " + fixed(s.auc, 6)};
      }
      ++slices;
      double sum = 0.0;
      const auto slice = threshold_agreement(a, s.slice);
      for (std::size_t p = 0; p < a.counts().size(); ++p) {
        sum += std::abs(inputs[i].prediction.values()[p] - slice.bits()[p]);
      }
      const double m = sum / static_cast<double>(a.counts().size());
      if (want == 0 || m < want_mae) {
        want = s.slice;
        want_mae = m;
      }
    }
    if (row.detection->min_mae.slice != want || row.detection->min_mae.value != want_mae) {
      return {false, row.id + " MAE minimum at slice " +
                         std::to_string(row.detection->min_mae.slice) + ", oracle " +
                         std::to_string(want)};
    }
  }

  // Every instance at full agreement: the prediction is binary and equals the support slice.
  spec.levels = {12};
  spec.min_instances = 1;
  spec.max_instances = 1;
  spec.seed = 100;
  for (const auto& d : harness::generate_synthetic(spec)) {
    const auto r = evaluate_against_stack(normalize_saliency(d.agreement),
                                          build_nested_stack(d.agreement));
    if (r.min_mae.slice != 1 || r.min_mae.value != 0.0) {
      return {false, d.id + " binary agreement: MAE minimum not 0 at slice 1"};
    }
  }
  return {true, std::to_string(report.images.size()) + " images, " + std::to_string(slices) +
                    " slices at AUC 1, SOR 1, MAE minimum matches oracle"};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  std::vector<std::vector<std::string>> artefacts;
  for (int run = 0; run < 2; ++run) {
    testing::TempDir dir("acceptance");
    const auto d = [&](const char* name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"gen-synthetic", "--out", d("data"), "--seed", "5", "--count", "10", "--size", "64"},
        {"train-toy", "--manifest", d("data/manifest.jsonl"), "--seed", "5", "--epochs", "30",
         "--subitizer-epochs", "20", "--out", d("model.ckpt"), "--log", d("train.csv")},
        {"infer", "--checkpoint", d("model.ckpt"), "--manifest", d("data/manifest.jsonl"),
         "--out", d("pred")},
        {"eval-detect", "--manifest", d("data/manifest.jsonl"), "--pred-dir", d("pred"),
         "--out", d("detect.json")},
        {"eval-subitize", "--manifest", d("data/manifest.jsonl"), "--predictions",
         d("pred/counts.csv"), "--out", d("subitize.json")}};
    for (const auto& args : steps) {
      std::ostringstream out;
      std::ostringstream err;
      if (cli::cli_main(args, out, err) != cli::kExitOk) {
        return {false, args.front() + " failed: " + err.str()};
      }
    }
    artefacts.push_back({slurp(dir / "model.ckpt"), slurp(dir / "train.csv"),
                         slurp(dir / "detect.json"), slurp(dir / "subitize.json")});
  }
  const std::vector<std::string> names{"checkpoint", "training log", "detection report",
                                       "subitizing report"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (artefacts[0][i].empty() || artefacts[0][i] != artefacts[1][i]) {
      return {false, names[i] + " differs between runs"};
    }
  }
  return {true, "checkpoint, training log and both reports byte-identical (" +
                    std::to_string(artefacts[0][2].size()) + " + " +
                    std::to_string(artefacts[0][3].size()) + " report bytes)"};
}

Outcome pca_oracle() {
  std::mt19937_64 rng(1111);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto x =
        testing::spread_stack(rng, uniform_int(rng, 4, 24), uniform_int(rng, 4, 24));
    const auto got = net::pca_visualize(x);
    const auto want = testing::jacobi(testing::covariance(x));
    if (got.valid_components != net::kPcaComponents) {
      return {false, "stack " + std::to_string(trial) + " reported rank deficiency"};
    }
    for (int k = 0; k < net::kPcaComponents; ++k) {
      const auto& g = got.components[static_cast<std::size_t>(k)];
      const auto& v = want.vectors[static_cast<std::size_t>(k)];
      double dot = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        dot += g[i] * v[i];
      }
      const double sign = dot < 0.0 ? -1.0 : 1.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        worst = std::max(worst, std::abs(g[i] - sign * v[i]));
      }
    }
  }
  return {worst <= 1e-8, "50 stacks, top-3 components, max deviation up to sign " + sci(worst)};
}

int run(const std::set<int>& only) {
  const std::vector<Criterion> criteria{
      {1, "four-class subitizing mean AP", four_class_mean},
      {2, "count-weighted subitizing AP", weighted_five_class},
      {3, "count class distribution", count_distribution},
      {4, "nested stack invariants", stack_invariants},
      {5, "SOR against closed-form Spearman", sor_enumeration},
      {6, "detection and AP metric oracles", metric_oracles},
      {7, "finite-difference gradients", gradients},
      {8, "toy training convergence", toy_training},
      {9, "self-evaluation identity", self_evaluation},
      {10, "end-to-end determinism", determinism},
      {11, "PCA against Jacobi eigendecomposition", pca_oracle},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << std::setw(2) << c.id << "] " << c.name
              << ": " << o.detail << " (" << fixed(secs, 1) << " s)" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace relsal::acceptance

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    only.insert(std::atoi(argv[i]));
  }
  return relsal::acceptance::run(only);
}
