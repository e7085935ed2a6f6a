#pragma once

#include "latentkg/toy_model.hpp"
#include "latentkg/trace.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

enum class PosTag { kNoun, kProperNoun, kVerb, kOther };

/// Maps Universal POS strings: NOUN, PROPN and VERB are recognized, every
/// other tag (AUX, ADJ, DET, ...) is kOther.
PosTag parse_pos_tag(std::string_view tag);
std::string_view to_string(PosTag tag);

struct TaggedWord {
  std::string text;
  PosTag tag = PosTag::kOther;
};

/// Absolute token interval [begin, end) of one word.
struct TokenRange {
  int begin = 0;
  int end = 0;
};

class DegenerateWeightsError : public DegenerateInputError {
 public:
  using DegenerateInputError::DegenerateInputError;
};

class PlanError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Binary token weights over the claim: 1 on the last token of every noun,
/// proper noun and verb, 0 elsewhere. Throws DegenerateWeightsError when the
/// claim has none of those.
Vectorf compute_pos_weights(std::span<const TaggedWord> words,
                            std::span<const TokenRange> alignment,
                            InputSpan input_span);

Vectorf uniform_weights(InputSpan input_span);

/// Weighted sum of hidden states, sum_i w_i h_i, accumulated in ascending
/// token order. With `mean_normalize` the sum is divided by sum_i w_i.
template <typename Derived, typename WeightDerived>
Vector<typename Derived::Scalar> merge_activations(
    const Eigen::MatrixBase<Derived>& rows,
    const Eigen::MatrixBase<WeightDerived>& weights, bool mean_normalize = false) {
  using Scalar = typename Derived::Scalar;
  if (rows.rows() != weights.size()) {
    throw ArgumentError("merge: " + std::to_string(rows.rows()) +
                        " rows but " + std::to_string(weights.size()) +
                        " weights");
  }
  Vector<Scalar> out = Vector<Scalar>::Zero(rows.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto w = static_cast<Scalar>(weights[i]);
    total += w;
    for (Eigen::Index j = 0; j < rows.cols(); ++j) out[j] += w * rows(i, j);
  }
  if (mean_normalize) {
    if (total == Scalar(0)) throw ArgumentError("merge: weights sum to zero");
    out /= total;
  }
  return out;
}

struct MergedVector {
  int layer_index = 0;
  Vectorf vector;
};

struct PatchPlan {
  TokenSequence target;
  int placeholder_position = 0;
  std::vector<MergedVector> merged;  // ascending layer order

  int hidden_dim() const;
  const MergedVector& at_layer(int layer) const;
};

struct PlanOptions {
  bool include_layer_zero = false;
  bool mean_normalize = false;
  std::string placeholder = "x";
};

/// Index of the single token whose text equals `placeholder`. Throws
/// PlanError when there is none or more than one.
int find_placeholder(const TokenSequence& target, std::string_view placeholder = "x");

/// One merged vector per layer 1..L (0..L with include_layer_zero) taken from
/// the trace rows inside its input span.
PatchPlan build_patch_plan(const ActivationTrace& trace, const Vectorf& weights,
                           const TokenSequence& target, const PlanOptions& options = {});

/// Greedy generation on the target prompt with the placeholder's input
/// embedding replaced by the merged vector of `layer`.
std::string run_patched(const PatchableModel& model, const PatchPlan& plan, int layer);

using LayerOutputs = std::map<int, std::string>;

/// run_patched for every planned layer. Layers run on up to `threads` workers
/// (0 = hardware concurrency); the result equals the sequential loop.
LayerOutputs sweep_layers(const PatchableModel& model, const PatchPlan& plan,
                          unsigned threads = 0);

// Patch-plan container: manifest.json plus merged.f32le of shape [layers, d].
void save_plan(const PatchPlan& plan, const std::filesystem::path& dir);
PatchPlan load_plan(const std::filesystem::path& dir);

/// One line of an outputs file. `layer` is kInferenceLayer for the unpatched
/// inference; `valid` stays empty until the decode stage fills it.
struct OutputRecord {
  int layer = 0;
  std::string text;
  std::optional<bool> valid;

  friend bool operator==(const OutputRecord&, const OutputRecord&) = default;
};

std::vector<OutputRecord> to_records(const LayerOutputs& outputs);
std::string format_output_records(std::span<const OutputRecord> records);
std::vector<OutputRecord> parse_output_records(std::string_view jsonl);
void write_output_records(const std::filesystem::path& path,
                          std::span<const OutputRecord> records);
std::vector<OutputRecord> read_output_records(const std::filesystem::path& path);

}  // namespace latentkg
