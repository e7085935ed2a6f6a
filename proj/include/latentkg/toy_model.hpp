#pragma once

#include "latentkg/tokenizer.hpp"
#include "latentkg/trace.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

/// Replacement for one row of the input-embedding matrix.
struct EmbeddingPatch {
  int position = 0;
  Vectorf vector;
};

struct Generation {
  std::string text;
  std::vector<int> token_ids;
  std::vector<RowMatrixf> hidden_states;  // L+1 entries when captured
  std::map<int, RowMatrixf> attention;    // per block, when captured
};

/// What the patching machinery needs from a decoder: its shape, the input
/// embedding matrix of a prompt, and greedy generation with an optional
/// substituted embedding row.
class PatchableModel {
 public:
  virtual ~PatchableModel() = default;

  virtual ModelConfig config() const = 0;
  virtual std::string name() const = 0;

  virtual RowMatrixf input_embeddings(const TokenSequence& tokens,
                                      const EmbeddingPatch* patch) const = 0;

  virtual Generation generate(const TokenSequence& prompt,
                              const EmbeddingPatch* patch, bool capture_states,
                              bool capture_attention) const = 0;

  int layer_count() const { return config().layer_count; }
  int hidden_dim() const { return config().hidden_dim; }
};

enum class TokenClass {
  kBos,
  kEos,
  kOpen,
  kLabelTrue,
  kLabelFalse,
  kFacts,
  kNegation,
  kArgOpen,
  kArgSep,
  kArgClose,
  kAnd,
  kFactSep,
  kClose,
  kProse,
  kUnaryPredicate,
  kBinaryPredicate,
  kEntity,
  kFiller,
};

/// Output vocabulary of the toy model. The first ids carry the punctuation of
/// the structured answer format, followed by an interleaved lexicon of prose
/// fragments, predicate names and entity names; the remaining ids are filler.
class ToyVocabulary {
 public:
  explicit ToyVocabulary(int vocab_size);

  int size() const { return static_cast<int>(texts_.size()); }
  std::string_view text(int id) const { return texts_.at(static_cast<std::size_t>(id)); }
  TokenClass token_class(int id) const { return classes_.at(static_cast<std::size_t>(id)); }
  const std::vector<int>& ids_of(TokenClass c) const;

  // True when every class needed for a structured answer has an id.
  bool supports_structured_output() const;

 private:
  std::vector<std::string> texts_;
  std::vector<TokenClass> classes_;
  std::vector<std::vector<int>> by_class_;
};

/// Deterministic pre-norm decoder: single-head causal attention and a GELU
/// feed-forward per block, parameter-free layer norm, output projection tied
/// to the embedding table. Weights come from splitmix64(seed) mapped onto
/// uniform(-0.05, 0.05); every reduction runs in ascending index order.
///
/// Decoding is greedy. When the vocabulary allows it, candidates are limited
/// to those that keep the output a prefix of either free prose or a complete
/// `{"label": ..., "facts": [...]}` answer within the token budget.
class ToyModel final : public PatchableModel {
 public:
  static constexpr std::size_t kDefaultCapacityBytes = std::size_t{1} << 30;
  static constexpr float kRepetitionPenalty = 0.25f;

  explicit ToyModel(const ModelConfig& config,
                    std::size_t capacity_bytes = kDefaultCapacityBytes);

  ModelConfig config() const override { return config_; }
  std::string name() const override { return "toy"; }

  RowMatrixf input_embeddings(const TokenSequence& tokens,
                              const EmbeddingPatch* patch) const override;

  Generation generate(const TokenSequence& prompt, const EmbeddingPatch* patch,
                      bool capture_states,
                      bool capture_attention) const override;

  const ToyTokenizer& tokenizer() const { return tokenizer_; }
  const ToyVocabulary& vocabulary() const { return vocabulary_; }
  const RowMatrixf& embedding_table() const { return embedding_; }

  std::uint64_t checksum() const;
  // 0 = embedding table, l = block l.
  std::uint64_t layer_checksum(int layer) const;

 private:
  struct Block {
    RowMatrixf wq, wk, wv, wo;  // d x d
    RowMatrixf w1;              // d x 4d
    RowMatrixf w2;              // 4d x d
  };

  class Runner;

  ModelConfig config_;
  ToyTokenizer tokenizer_;
  ToyVocabulary vocabulary_;
  RowMatrixf embedding_;  // vocab x d
  std::vector<Block> blocks_;
};

ToyModel build_toy_model(
    const ModelConfig& config,
    std::size_t capacity_bytes = ToyModel::kDefaultCapacityBytes);

/// Runs the prompt once, capturing layer 0..L states on the prompt tokens, and
/// records the greedy continuation.
ActivationTrace run_with_trace(const PatchableModel& model,
                               const TokenSequence& prompt,
                               InputSpan input_span,
                               bool capture_attention = false);

}  // namespace latentkg
