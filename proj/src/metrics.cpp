#include "latentkg/metrics.hpp"

#include "latentkg/text.hpp"

#include <cmath>
#include <cstdio>

namespace latentkg {

namespace {

int column(Verdict v) {
  switch (v) {
    case Verdict::kTrue: return 0;
    case Verdict::kFalse: return 1;
    case Verdict::kInvalid: return 2;
  }
  return 2;
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

ConsistencyStat stat_of(const std::vector<double>& xs) {
  ConsistencyStat s;
  s.count = static_cast<int>(xs.size());
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kTrue: return "true";
    case Verdict::kFalse: return "false";
    case Verdict::kInvalid: return "invalid";
  }
  return "invalid";
}

Verdict verdict_of(const ParseOutcome& outcome) {
  if (const auto* s = std::get_if<StructuredOutput>(&outcome)) {
    return s->label ? Verdict::kTrue : Verdict::kFalse;
  }
  return Verdict::kInvalid;
}

Verdict majority_label(const std::map<int, Verdict>& layer_labels) {
  int t = 0;
  int f = 0;
  Verdict deepest = Verdict::kInvalid;
  for (const auto& [layer, v] : layer_labels) {
    if (v == Verdict::kTrue) ++t;
    if (v == Verdict::kFalse) ++f;
    if (v != Verdict::kInvalid) deepest = v;
  }
  if (t > f) return Verdict::kTrue;
  if (f > t) return Verdict::kFalse;
  return deepest;
}

double self_consistency(const std::map<int, Verdict>& layer_labels, Verdict inference_label) {
  if (layer_labels.empty()) throw ArgumentError("self-consistency needs at least one layer");
  if (inference_label == Verdict::kInvalid) {
    throw ArgumentError("self-consistency needs a true or false inference label");
  }
  int match = 0;
  for (const auto& [layer, v] : layer_labels) match += v == inference_label ? 1 : 0;
  return static_cast<double>(match) / static_cast<double>(layer_labels.size());
}

int ConfusionMatrix::total() const {
  int n = 0;
  for (const auto& row : counts) {
    for (int c : row) n += c;
  }
  return n;
}

int ConfusionMatrix::at(bool gold, Verdict predicted) const {
  return counts[gold ? 0 : 1][static_cast<std::size_t>(column(predicted))];
}

EvalReport compute_report(std::span<const LabeledPrediction> predictions,
                          std::span<const RunLabels> runs) {
  if (predictions.empty()) throw ArgumentError("report needs at least one prediction");
  EvalReport r;
  std::vector<double> scores;
  std::vector<bool> gold;
  int invalid_defaulted = 0;
  for (const auto& p : predictions) {
    ++r.confusion.counts[p.gold ? 0 : 1][static_cast<std::size_t>(column(p.predicted))];
    gold.push_back(p.gold);
    if (p.score) {
      scores.push_back(*p.score);
      continue;
    }
    r.hard_label_auc = true;
    switch (p.predicted) {
      case Verdict::kTrue: scores.push_back(1.0); break;
      case Verdict::kFalse: scores.push_back(0.0); break;
      case Verdict::kInvalid:
        scores.push_back(0.5);
        ++invalid_defaulted;
        break;
    }
  }
  if (invalid_defaulted) {
    r.warnings.push_back(std::to_string(invalid_defaulted) +
                         " invalid prediction(s) scored 0.5 for ROC AUC");
  }

  const auto& c = r.confusion;
  const double tt = c.at(true, Verdict::kTrue);
  const double tf = c.at(true, Verdict::kFalse);
  const double ft = c.at(false, Verdict::kTrue);
  const double ff = c.at(false, Verdict::kFalse);
  const int gold_true = c.counts[0][0] + c.counts[0][1] + c.counts[0][2];
  const int gold_false = c.counts[1][0] + c.counts[1][1] + c.counts[1][2];
  const int n = c.total();

  r.true_class = {ratio(tt, tt + ft), ratio(tt, gold_true), 0, gold_true};
  r.true_class.f1 = f1(r.true_class.precision, r.true_class.recall);
  r.false_class = {ratio(ff, ff + tf), ratio(ff, gold_false), 0, gold_false};
  r.false_class.f1 = f1(r.false_class.precision, r.false_class.recall);
  const double wt = static_cast<double>(gold_true) / n;
  const double wf = static_cast<double>(gold_false) / n;
  r.weighted = {wt * r.true_class.precision + wf * r.false_class.precision,
                wt * r.true_class.recall + wf * r.false_class.recall,
                wt * r.true_class.f1 + wf * r.false_class.f1, n};
  r.accuracy = (tt + ff) / n;

  r.roc_auc = roc_auc(scores, gold);
  if (!r.roc_auc) r.warnings.push_back("ROC AUC undefined: gold labels contain one class");

  std::vector<double> sc_true;
  std::vector<double> sc_false;
  int layer_outputs = 0;
  int valid_layers = 0;
  for (const auto& run : runs) {
    for (const auto& [layer, v] : run.layers) {
      ++layer_outputs;
      valid_layers += v != Verdict::kInvalid ? 1 : 0;
    }
    if (run.layers.empty() || run.inference == Verdict::kInvalid) continue;
    const double s = self_consistency(run.layers, run.inference);
    (run.inference == Verdict::kTrue ? sc_true : sc_false).push_back(s);
  }
  if (!sc_true.empty()) r.consistency_true = stat_of(sc_true);
  if (!sc_false.empty()) r.consistency_false = stat_of(sc_false);
  if (layer_outputs > 0) {
    r.valid_output_rate = static_cast<double>(valid_layers) / layer_outputs;
  } else {
    r.valid_output_rate = static_cast<double>(n - c.counts[0][2] - c.counts[1][2]) / n;
  }
  return r;
}

std::string report_csv_header() {
  return "setting,precision_true,precision_false,precision_avg,recall_true,recall_false,"
         "recall_avg,f1_true,f1_false,f1_avg,roc_auc,accuracy,"
         "self_consistency_true_mean,self_consistency_true_std,"
         "self_consistency_false_mean,self_consistency_false_std,valid_output_rate,"
         "gold_true,gold_false,pred_true_gold_true,pred_false_gold_true,"
         "pred_invalid_gold_true,pred_true_gold_false,pred_false_gold_false,"
         "pred_invalid_gold_false\n";
}

std::string report_csv_row(std::string_view setting, const EvalReport& r) {
  std::string out(setting);
  auto add = [&](const std::string& cell) { out += "," + cell; };
  for (double v : {r.true_class.precision, r.false_class.precision, r.weighted.precision,
                   r.true_class.recall, r.false_class.recall, r.weighted.recall,
                   r.true_class.f1, r.false_class.f1, r.weighted.f1}) {
    add(format_real(v));
  }
  add(optional_cell(r.roc_auc));
  add(format_real(r.accuracy));
  for (const auto& s : {r.consistency_true, r.consistency_false}) {
    add(s ? format_real(s->mean) : "");
    add(s ? format_real(s->std) : "");
  }
  add(format_real(r.valid_output_rate));
  add(std::to_string(r.true_class.support));
  add(std::to_string(r.false_class.support));
  for (const auto& row : r.confusion.counts) {
    for (int v : row) add(std::to_string(v));
  }
  return out + "\n";
}

std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_width = 7;
  for (const auto& [name, rep] : rows) name_width = std::max(name_width, name.size());
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  std::string out = pad("SETTING", name_width) +
                    " | PRECISION           | RECALL              | F1                  "
                    "| ROC AUC | ACCURACY | SELF-CONSISTENCY\n";
  out += pad("", name_width) +
         " | TRUE  FALSE AVG     | TRUE  FALSE AVG     | TRUE  FALSE AVG     "
         "|         |          | TRUE*         FALSE*\n";
  for (const auto& [name, r] : rows) {
    auto triple = [&](double a, double b, double c) {
      return fixed3(a) + " " + fixed3(b) + " " + fixed3(c) + "   ";
    };
    auto consistency = [](const std::optional<ConsistencyStat>& s) {
      return s ? fixed3(s->mean) + " +- " + fixed3(s->std) : std::string("-");
    };
    out += pad(name, name_width) + " | " +
           triple(r.true_class.precision, r.false_class.precision, r.weighted.precision) +
           "| " + triple(r.true_class.recall, r.false_class.recall, r.weighted.recall) + "| " +
           triple(r.true_class.f1, r.false_class.f1, r.weighted.f1) + "| " +
           pad(r.roc_auc ? fixed3(*r.roc_auc) : "-", 7) + " | " + pad(fixed3(r.accuracy), 8) +
           " | " + pad(consistency(r.consistency_true), 13) + " " +
           consistency(r.consistency_false) + "\n";
  }
  return out;
}

}  // namespace latentkg
