#pragma once

#include "latentkg/literal_parse.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

enum class Verdict { kTrue, kFalse, kInvalid };

std::string_view to_string(Verdict verdict);
Verdict verdict_of(const ParseOutcome& outcome);

struct LabeledPrediction {
  std::string claim_id;
  bool gold = false;
  Verdict predicted = Verdict::kInvalid;
  std::optional<double> score;  // belief that the claim is true
};

/// Most frequent of true/false across layers. Invalid only if no layer has a
/// valid label; a tie goes to the label of the deepest valid layer.
Verdict majority_label(const std::map<int, Verdict>& layer_labels);

/// Fraction of layers whose label equals `inference_label` (invalid layers
/// count as mismatches). Throws ArgumentError for no layers or an invalid
/// inference label.
double self_consistency(const std::map<int, Verdict>& layer_labels, Verdict inference_label);

/// Rank-statistic ROC AUC with midranks for ties; positives are entries with
/// label true. Empty when either class is absent.
template <typename Scores, typename Labels>
std::optional<double> roc_auc(const Scores& scores, const Labels& labels) {
  const std::size_t n = std::size(scores);
  if (n != std::size(labels)) throw ArgumentError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0;
  double positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += midrank;
        positives += 1;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  return (positive_rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives);
}

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int support = 0;  // gold count
};

/// Rows: gold true, gold false. Columns: predicted true, false, invalid.
struct ConfusionMatrix {
  std::array<std::array<int, 3>, 2> counts{};

  int total() const;
  int at(bool gold, Verdict predicted) const;
};

struct ConsistencyStat {
  double mean = 0;
  double std = 0;  // population
  int count = 0;
};

/// Per-claim latent outputs used for self-consistency and the valid-output
/// rate.
struct RunLabels {
  std::string claim_id;
  Verdict inference = Verdict::kInvalid;
  std::map<int, Verdict> layers;
};

struct EvalReport {
  ConfusionMatrix confusion;
  ClassMetrics true_class;
  ClassMetrics false_class;
  ClassMetrics weighted;  // support-weighted average
  double accuracy = 0;
  std::optional<double> roc_auc;
  bool hard_label_auc = false;  // some score was derived from the label
  std::optional<ConsistencyStat> consistency_true;   // runs whose inference is true
  std::optional<ConsistencyStat> consistency_false;  // runs whose inference is false
  double valid_output_rate = 0;
  std::vector<std::string> warnings;
};

/// Invalid predictions count against recall of their gold class and never
/// enter a precision numerator or denominator. Missing scores default to
/// 1 (true), 0 (false) and 0.5 (invalid, with a warning). Self-consistency
/// and the valid-output rate come from `runs`; without runs the rate is the
/// share of valid predictions.
EvalReport compute_report(std::span<const LabeledPrediction> predictions,
                          std::span<const RunLabels> runs = {});

/// setting,precision_true,precision_false,precision_avg,recall_true,... in the
/// column order of the performance table.
std::string report_csv_header();
std::string report_csv_row(std::string_view setting, const EvalReport& report);

/// Fixed-width text table with the same columns.
std::string format_report_table(
    const std::vector<std::pair<std::string, EvalReport>>& rows);

}  // namespace latentkg
