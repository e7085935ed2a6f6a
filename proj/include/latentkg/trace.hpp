#pragma once

#include "latentkg/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace latentkg {

struct ModelConfig {
  int layer_count = 4;
  int hidden_dim = 32;
  int vocab_size = 512;
  int max_new_tokens = 48;
  std::uint64_t seed = 7;

  /// Throws ArgumentError unless every dimension is strictly positive and
  /// the vocabulary has at least two entries.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> texts;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  // Lengths agree and, when vocab_size > 0, every id is in range.
  void validate(int vocab_size = 0) const;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Half-open token interval [start, end) of the claim inside the source prompt.
struct InputSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }

  friend bool operator==(const InputSpan&, const InputSpan&) = default;
};

struct LayerActivations {
  int layer_index = 0;
  RowMatrixf matrix;  // one row per prompt token
};

/// Per-layer hidden states of one prompt forward pass. Layer 0 holds the input
/// embeddings, layers 1..L the block outputs after the residual add.
struct ActivationTrace {
  ModelConfig config;
  std::string model_name = "toy";
  TokenSequence tokens;
  InputSpan input_span;
  std::vector<LayerActivations> layers;
  std::string generated_text;
  std::optional<std::vector<float>> weights;  // token weights over input_span
  std::map<int, RowMatrixf> attention;        // opaque, never analyzed

  const RowMatrixf& layer(int l) const;

  // Exactly L+1 ordered layers with n x d matrices and a valid span.
  void validate() const;
};

bool bitwise_equal(const ActivationTrace& a, const ActivationTrace& b);

}  // namespace latentkg
