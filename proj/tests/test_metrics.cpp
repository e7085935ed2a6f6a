#include "latentkg/metrics.hpp"

#include <gtest/gtest.h>

#include <random>

namespace latentkg {
namespace {

constexpr Verdict T = Verdict::kTrue;
constexpr Verdict F = Verdict::kFalse;
constexpr Verdict I = Verdict::kInvalid;

// O(n^2) pair-counting oracle: P(score+ > score-) + 0.5 P(tie).
double auc_oracle(const std::vector<double>& s, const std::vector<bool>& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!y[i] || y[j]) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

std::vector<LabeledPrediction> from_counts(int tt, int tf, int ti, int ft, int ff, int fi) {
  std::vector<LabeledPrediction> out;
  auto add = [&](int n, bool gold, Verdict v) {
    for (int i = 0; i < n; ++i) {
      out.push_back({std::to_string(out.size()), gold, v, std::nullopt});
    }
  };
  add(tt, true, T);
  add(tf, true, F);
  add(ti, true, I);
  add(ft, false, T);
  add(ff, false, F);
  add(fi, false, I);
  return out;
}

TEST(Majority, Examples) {
  EXPECT_EQ(majority_label({{1, T}, {2, T}, {3, F}}), T);
  EXPECT_EQ(majority_label({{1, F}, {2, I}, {3, F}, {4, T}}), F);
  EXPECT_EQ(majority_label({{1, T}, {2, F}}), F);  // tie: deepest valid layer
  EXPECT_EQ(majority_label({{1, T}, {2, F}, {3, I}}), F);
  EXPECT_EQ(majority_label({{1, I}, {2, I}}), I);
  EXPECT_EQ(majority_label({}), I);
}

TEST(SelfConsistency, Examples) {
  EXPECT_DOUBLE_EQ(self_consistency({{1, T}, {2, T}, {3, F}, {4, T}}, T), 0.75);
  EXPECT_DOUBLE_EQ(self_consistency({{1, T}, {2, I}}, T), 0.5);
  EXPECT_THROW(self_consistency({}, T), ArgumentError);
  EXPECT_THROW(self_consistency({{1, T}}, I), ArgumentError);
}

TEST(RocAuc, MatchesPairOracleWithTies) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> bucket(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> s(200);
    std::vector<bool> y(200);
    for (std::size_t i = 0; i < s.size(); ++i) {
      y[i] = coin(gen);
      s[i] = bucket(gen) / 10.0 + (y[i] ? 0.1 : 0.0);
    }
    const auto auc = roc_auc(s, y);
    ASSERT_TRUE(auc);
    EXPECT_NEAR(*auc, auc_oracle(s, y), 1e-12);
  }
}

TEST(RocAuc, EdgeCases) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<bool>{false, true}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<bool>{false, true}), 0.5);
  EXPECT_FALSE(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<bool>{true, true}));
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, std::vector<bool>{}), ArgumentError);
}

// FEVER inference row of the performance table; values are given to three
// decimals, so each must agree within half a unit in the last place.
TEST(Report, FeverInferenceRow) {
  const auto preds = from_counts(331, 394, 1, 24, 250, 0);
  const EvalReport r = compute_report(preds);
  constexpr double tol = 0.0005;
  EXPECT_NEAR(r.true_class.precision, 0.932, tol);
  EXPECT_NEAR(r.false_class.precision, 0.388, tol);
  EXPECT_NEAR(r.weighted.precision, 0.783, tol);
  EXPECT_NEAR(r.true_class.recall, 0.456, tol);
  EXPECT_NEAR(r.false_class.recall, 0.912, tol);
  EXPECT_NEAR(r.weighted.recall, 0.581, tol);
  EXPECT_NEAR(r.true_class.f1, 0.612, tol);
  EXPECT_NEAR(r.false_class.f1, 0.545, tol);
  EXPECT_NEAR(r.weighted.f1, 0.594, tol);
  EXPECT_NEAR(r.accuracy, 0.581, tol);
  EXPECT_EQ(r.true_class.support, 726);
  EXPECT_EQ(r.false_class.support, 274);
  EXPECT_TRUE(r.hard_label_auc);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0], "1 invalid prediction(s) scored 0.5 for ROC AUC");
}

TEST(Report, HardLabelAucIsBalancedAccuracy) {
  const EvalReport r = compute_report(from_counts(331, 395, 0, 24, 250, 0));
  ASSERT_TRUE(r.roc_auc);
  EXPECT_NEAR(*r.roc_auc, 0.684, 0.0005);
  EXPECT_NEAR(*r.roc_auc, (331.0 / 726 + 250.0 / 274) / 2, 1e-12);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Report, ExactMarginals) {
  // 2 TT, 1 TF, 1 TI, 1 FT, 3 FF.
  const EvalReport r = compute_report(from_counts(2, 1, 1, 1, 3, 0));
  EXPECT_DOUBLE_EQ(r.true_class.precision, 2.0 / 3);
  EXPECT_DOUBLE_EQ(r.true_class.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.false_class.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.false_class.recall, 0.75);
  EXPECT_DOUBLE_EQ(r.accuracy, 5.0 / 8);
  EXPECT_DOUBLE_EQ(r.valid_output_rate, 7.0 / 8);
  EXPECT_EQ(r.confusion.total(), 8);
  EXPECT_EQ(r.confusion.at(true, I), 1);
}

TEST(Report, ExplicitScoresUsed) {
  std::vector<LabeledPrediction> p{{"a", true, T, 0.9}, {"b", false, T, 0.2}, {"c", true, F, 0.4}};
  const EvalReport r = compute_report(p);
  EXPECT_FALSE(r.hard_label_auc);
  EXPECT_DOUBLE_EQ(*r.roc_auc, 1.0);
}

TEST(Report, SingleClassHasNoAuc) {
  const EvalReport r = compute_report(from_counts(3, 1, 0, 0, 0, 0));
  EXPECT_FALSE(r.roc_auc);
  EXPECT_EQ(r.warnings.back(), "ROC AUC undefined: gold labels contain one class");
  EXPECT_DOUBLE_EQ(r.false_class.precision, 0.0);
  EXPECT_THROW(compute_report({}), ArgumentError);
}

TEST(Report, ConsistencyByInferenceLabel) {
  const auto preds = from_counts(1, 1, 0, 1, 0, 0);
  const std::vector<RunLabels> runs{{"0", T, {{1, T}, {2, T}, {3, F}, {4, T}}},
                                    {"1", T, {{1, T}, {2, I}, {3, F}, {4, F}}},
                                    {"2", F, {{1, F}, {2, F}}},
                                    {"3", I, {{1, F}}}};
  const EvalReport r = compute_report(preds, runs);
  ASSERT_TRUE(r.consistency_true && r.consistency_false);
  EXPECT_DOUBLE_EQ(r.consistency_true->mean, 0.5);
  EXPECT_DOUBLE_EQ(r.consistency_true->std, 0.25);
  EXPECT_EQ(r.consistency_true->count, 2);
  EXPECT_DOUBLE_EQ(r.consistency_false->mean, 1.0);
  EXPECT_DOUBLE_EQ(r.consistency_false->std, 0.0);
  EXPECT_DOUBLE_EQ(r.valid_output_rate, 10.0 / 11);
}

TEST(Report, CsvAndTable) {
  const EvalReport r = compute_report(from_counts(2, 1, 1, 1, 3, 0));
  const std::string header = report_csv_header();
  const std::string row = report_csv_row("latent", r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.rfind("latent,0.6666666666666666,0.75,", 0), 0u) << row;
  EXPECT_NE(row.find(",,,,0.875,4,4,2,1,1,1,3,0\n"), std::string::npos) << row;
  const std::string table = format_report_table({{"inference", r}, {"latent", r}});
  EXPECT_EQ(table.rfind("SETTING   | PRECISION", 0), 0u) << table;
  EXPECT_NE(table.find("inference | 0.667 0.750 0.708   | 0.500 0.750 0.625   |"), std::string::npos)
      << table;
}

}  // namespace
}  // namespace latentkg
