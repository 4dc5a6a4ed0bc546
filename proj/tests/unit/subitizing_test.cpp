#include "relsal/subitizing.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "relsal/error.hpp"

namespace relsal {
namespace {

using testing::oracle_continuous;
using testing::oracle_voc07;

TEST(CountSchemeTest, LabelsAndClassMapping) {
  const auto sos = CountScheme::sos();
  const auto pascal = CountScheme::pascal_s();
  EXPECT_EQ(sos.labels(), (std::vector<std::string>{"0", "1", "2", "3", "4+"}));
  EXPECT_EQ(pascal.labels(), (std::vector<std::string>{"1", "2", "3", "4+"}));
  EXPECT_EQ(sos.labels()[count_to_class(3, sos)], "3");
  EXPECT_EQ(sos.labels()[count_to_class(0, sos)], "0");
  EXPECT_EQ(sos.labels()[count_to_class(9, sos)], "4+");
  EXPECT_EQ(pascal.labels()[count_to_class(9, pascal)], "4+");
  EXPECT_THROW((void)count_to_class(0, pascal), RangeError);
  EXPECT_THROW((void)count_to_class(-1, sos), RangeError);
  EXPECT_EQ(CountScheme::from_name("pascals").size(), 4U);
  EXPECT_THROW((void)CountScheme::from_name("voc"), RangeError);
}

TEST(AveragePrecisionTest, PerfectRankingIsOneForBothMethods) {
  const std::vector<double> conf{0.9, 0.8, 0.2, 0.1};
  const std::vector<bool> pos{true, true, false, false};
  EXPECT_DOUBLE_EQ(average_precision(conf, pos, ApMethod::kVoc07), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(conf, pos, ApMethod::kContinuous), 1.0);
}

TEST(AveragePrecisionTest, SinglePositiveRankedLastOfTen) {
  std::vector<double> conf;
  std::vector<bool> pos(10, false);
  for (int i = 0; i < 10; ++i) {
    conf.push_back(1.0 - i / 10.0);
  }
  pos[9] = true;
  EXPECT_DOUBLE_EQ(average_precision(conf, pos, ApMethod::kContinuous), 0.1);
  // Single step at recall 1: both methods agree.
  EXPECT_DOUBLE_EQ(average_precision(conf, pos, ApMethod::kVoc07), 0.1);
}

TEST(AveragePrecisionTest, TiesKeepInputOrder) {
  const std::vector<double> conf{0.5, 0.5};
  EXPECT_DOUBLE_EQ(average_precision(conf, {true, false}, ApMethod::kContinuous), 1.0);
  EXPECT_DOUBLE_EQ(average_precision(conf, {false, true}, ApMethod::kContinuous), 0.5);
}

TEST(AveragePrecisionTest, ErrorsOnMissingPositivesAndLengthMismatch) {
  EXPECT_THROW((void)average_precision({0.1, 0.2}, {false, false}), UndefinedError);
  EXPECT_THROW((void)average_precision({0.1}, {true, false}), RangeError);
  EXPECT_EQ(ap_method_from_name("continuous"), ApMethod::kContinuous);
  EXPECT_THROW((void)ap_method_from_name("area"), RangeError);
}

TEST(AveragePrecisionTest, MatchesRankEnumerationOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = testing::uniform_int(rng, 1, 20);
    std::vector<double> conf;
    std::vector<bool> pos;
    for (int i = 0; i < n; ++i) {
      conf.push_back(testing::uniform_int(rng, 0, 6) / 6.0);  // coarse grid forces ties
      pos.push_back(testing::uniform_real(rng) < 0.4);
    }
    if (std::count(pos.begin(), pos.end(), true) == 0) {
      pos[0] = true;
    }
    ASSERT_NEAR(average_precision(conf, pos, ApMethod::kContinuous),
                oracle_continuous(conf, pos), 1e-12);
    ASSERT_NEAR(average_precision(conf, pos, ApMethod::kVoc07), oracle_voc07(conf, pos), 1e-12);
  }
}

TEST(AveragePrecisionTest, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> conf;
    std::vector<double> warped;
    std::vector<bool> pos;
    for (int i = 0; i < 15; ++i) {
      conf.push_back(testing::uniform_real(rng));
      warped.push_back(std::exp(3.0 * conf.back()) - 7.0);
      pos.push_back(i % 3 == 0);
    }
    for (const auto m : {ApMethod::kVoc07, ApMethod::kContinuous}) {
      const double ap = average_precision(conf, pos, m);
      EXPECT_EQ(ap, average_precision(warped, pos, m));
      EXPECT_GE(ap, 0.0);
      EXPECT_LE(ap, 1.0);
    }
  }
}

TEST(SubitizingReportTest, PascalSMeanOfFourClasses) {
  const auto r = subitizing_report(
      {{"1", 0.62, 0}, {"2", 0.42, 0}, {"3", 0.20, 0}, {"4+", 0.55, 0}});
  EXPECT_NEAR(r.mean_ap, 0.4475, 1e-12);
  EXPECT_NEAR(r.mean_ap, 0.45, 0.005);
}

TEST(SubitizingReportTest, SosWeightedAndUnweightedMeans) {
  const std::vector<std::size_t> counts{338, 617, 219, 137, 69};
  const std::vector<double> ours{0.95, 0.92, 0.61, 0.59, 0.67};
  const std::vector<double> baseline{0.93, 0.90, 0.51, 0.48, 0.65};
  std::vector<ClassAp> a;
  std::vector<ClassAp> b;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    a.push_back({std::to_string(i), ours[i], counts[i]});
    b.push_back({std::to_string(i), baseline[i], counts[i]});
  }
  // Independent arithmetic: sum(ap * n) / sum(n) with sum(n) = 1380.
  const double wa = (0.95 * 338 + 0.92 * 617 + 0.61 * 219 + 0.59 * 137 + 0.67 * 69) / 1380.0;
  const double wb = (0.93 * 338 + 0.90 * 617 + 0.51 * 219 + 0.48 * 137 + 0.65 * 69) / 1380.0;
  EXPECT_NEAR(subitizing_report(a).weighted_ap, wa, 1e-12);
  EXPECT_NEAR(subitizing_report(a).weighted_ap, 0.83, 0.005);
  EXPECT_NEAR(subitizing_report(b).mean_ap, 0.694, 1e-12);
  EXPECT_NEAR(subitizing_report(b).weighted_ap, wb, 1e-12);
  EXPECT_NEAR(subitizing_report(b).weighted_ap, 0.79, 0.005);
}

TEST(SubitizingReportTest, EqualCountsMakeWeightedEqualMean) {
  const auto r = subitizing_report({{"a", 0.3, 5}, {"b", 0.8, 5}, {"c", 0.1, 5}});
  EXPECT_NEAR(r.weighted_ap, r.mean_ap, 1e-15);
  EXPECT_THROW((void)subitizing_report({}), UndefinedError);
}

TEST(ClassDistributionTest, PascalSCountShares) {
  const auto d = class_distribution({{"1", 300}, {"2", 227}, {"3", 136}, {"4", 72},
                                     {"5", 43}, {"6", 28}, {"7", 18}, {"8+", 26}});
  const std::vector<double> printed{0.35, 0.27, 0.16, 0.08, 0.05, 0.03, 0.02, 0.03};
  ASSERT_EQ(d.size(), printed.size());
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(d[i].second, printed[i], 0.005) << d[i].first;
    total += d[i].second;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(d[0].second, 300.0 / 850.0);
}

TEST(ClassDistributionTest, SingleClassAndErrors) {
  EXPECT_DOUBLE_EQ(class_distribution({{"x", 4}})[0].second, 1.0);
  EXPECT_THROW((void)class_distribution({}), UndefinedError);
  EXPECT_THROW((void)class_distribution({{"x", 0}}), UndefinedError);
}

TEST(EvaluateSubitizingTest, OneVsRestWithTiesResolvedById) {
  const auto scheme = CountScheme::pascal_s();
  // Inputs deliberately out of id order.
  const std::vector<SubitizingPrediction> preds{
      {"b", {0.5, 0.1, 0.1, 0.3}},
      {"a", {0.5, 0.2, 0.2, 0.1}},
      {"c", {0.1, 0.7, 0.1, 0.1}},
  };
  const std::vector<SubitizingTruth> truth{{"a", 2}, {"b", 1}, {"c", 2}};
  const auto r = evaluate_subitizing(preds, truth, scheme, ApMethod::kContinuous);
  ASSERT_EQ(r.per_class.size(), 2U);
  // Class "1": a and b tie at 0.5, a first by id, so the single positive b sits at rank 2.
  EXPECT_EQ(r.per_class[0].label, "1");
  EXPECT_DOUBLE_EQ(r.per_class[0].ap, 0.5);
  EXPECT_EQ(r.per_class[1].label, "2");
  EXPECT_DOUBLE_EQ(r.per_class[1].ap, 1.0);
  EXPECT_EQ(r.skipped_classes, (std::vector<std::string>{"3", "4+"}));
}

TEST(EvaluateSubitizingTest, RejectsInconsistentInputs) {
  const auto scheme = CountScheme::sos();
  const std::vector<SubitizingTruth> truth{{"a", 1}};
  EXPECT_THROW((void)evaluate_subitizing({{"a", {1, 0}}}, truth, scheme), ShapeError);
  EXPECT_THROW((void)evaluate_subitizing({{"z", {1, 0, 0, 0, 0}}}, truth, scheme),
               InvariantError);
  EXPECT_THROW((void)evaluate_subitizing({}, truth, scheme), InvariantError);
  EXPECT_THROW((void)evaluate_subitizing({{"a", {std::nan(""), 0, 0, 0, 0}}}, truth, scheme),
               RangeError);
  EXPECT_THROW((void)evaluate_subitizing({{"a", {1, 0, 0, 0, 0}}}, {{"a", 1}, {"a", 2}}, scheme),
               InvariantError);
}

}  // namespace
}  // namespace relsal
