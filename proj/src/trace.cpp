#include "latentkg/trace.hpp"

namespace latentkg {

void ModelConfig::validate() const {
  if (layer_count < 1) throw ArgumentError("layer_count must be >= 1");
  if (hidden_dim < 1) throw ArgumentError("hidden_dim must be >= 1");
  if (vocab_size < 2) throw ArgumentError("vocab_size must be >= 2");
  if (max_new_tokens < 1) throw ArgumentError("max_new_tokens must be >= 1");
}

void TokenSequence::validate(int vocab_size) const {
  if (ids.size() != texts.size()) {
    throw ArgumentError("token ids and texts differ in length");
  }
  if (vocab_size <= 0) return;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_size) {
      throw ArgumentError("token " + std::to_string(i) + " has id " +
                          std::to_string(ids[i]) + " outside vocabulary of " +
                          std::to_string(vocab_size));
    }
  }
}

const RowMatrixf& ActivationTrace::layer(int l) const {
  if (l < 0 || l >= static_cast<int>(layers.size())) {
    throw ArgumentError("layer " + std::to_string(l) + " not in trace");
  }
  return layers[static_cast<std::size_t>(l)].matrix;
}

void ActivationTrace::validate() const {
  tokens.validate();
  const int n = static_cast<int>(tokens.size());
  if (static_cast<int>(layers.size()) != config.layer_count + 1) {
    throw FormatError("trace has " + std::to_string(layers.size()) +
                      " layers, expected L+1 = " +
                      std::to_string(config.layer_count + 1));
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& la = layers[l];
    if (la.layer_index != static_cast<int>(l)) {
      throw FormatError("layer entries out of order at " + std::to_string(l));
    }
    if (la.matrix.rows() != n || la.matrix.cols() != config.hidden_dim) {
      throw FormatError("layer " + std::to_string(l) + " has shape [" +
                        std::to_string(la.matrix.rows()) + "," +
                        std::to_string(la.matrix.cols()) + "], expected [" +
                        std::to_string(n) + "," +
                        std::to_string(config.hidden_dim) + "]");
    }
  }
  if (input_span.start < 0 || input_span.start >= input_span.end ||
      input_span.end > n) {
    throw FormatError("input_span [" + std::to_string(input_span.start) + "," +
                      std::to_string(input_span.end) +
                      ") invalid for " + std::to_string(n) + " tokens");
  }
  if (weights && static_cast<int>(weights->size()) != input_span.length()) {
    throw FormatError("weights length " + std::to_string(weights->size()) +
                      " differs from input_span length " +
                      std::to_string(input_span.length()));
  }
}

bool bitwise_equal(const ActivationTrace& a, const ActivationTrace& b) {
  if (!(a.config == b.config) || a.model_name != b.model_name ||
      !(a.tokens == b.tokens) || !(a.input_span == b.input_span) ||
      a.generated_text != b.generated_text ||
      a.layers.size() != b.layers.size() ||
      a.attention.size() != b.attention.size()) {
    return false;
  }
  if (a.weights.has_value() != b.weights.has_value()) return false;
  if (a.weights) {
    const auto& wa = *a.weights;
    const auto& wb = *b.weights;
    if (wa.size() != wb.size() ||
        std::memcmp(wa.data(), wb.data(), wa.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (a.layers[l].layer_index != b.layers[l].layer_index ||
        !bitwise_equal(a.layers[l].matrix, b.layers[l].matrix)) {
      return false;
    }
  }
  for (auto ia = a.attention.begin(), ib = b.attention.begin();
       ia != a.attention.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !bitwise_equal(ia->second, ib->second)) {
      return false;
    }
  }
  return true;
}

}  // namespace latentkg
