#pragma once

#include "latentkg/trace.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

/// A whitespace-delimited word and the tokens it was cut into.
struct WordSpan {
  std::string text;
  std::size_t byte_begin = 0;
  std::size_t byte_end = 0;
  int token_begin = 0;
  int token_end = 0;
};

struct Tokenization {
  TokenSequence tokens;
  std::vector<std::size_t> byte_begin;  // per token
  std::vector<std::size_t> byte_end;
  std::vector<WordSpan> words;  // alphanumeric words only

  /// Tokens lying inside [byte_begin, byte_end). Throws ArgumentError if the
  /// interval cuts through a token or covers none.
  InputSpan span_for_bytes(std::size_t begin, std::size_t end) const;
};

/// Deterministic subword tokenizer for the toy model. Words are alphanumeric
/// runs cut into pieces of at most four code points; continuation pieces are
/// prefixed with "##". Every other non-space code point is its own token. Ids
/// are FNV-1a hashes folded into [2, vocab_size).
class ToyTokenizer {
 public:
  static constexpr std::size_t kPieceLength = 4;

  explicit ToyTokenizer(int vocab_size);

  Tokenization tokenize(std::string_view text) const;
  int id_for(std::string_view piece) const;

 private:
  int vocab_size_;
};

}  // namespace latentkg
