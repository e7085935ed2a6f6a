#include "latentkg/tokenizer.hpp"

#include "latentkg/text.hpp"

namespace latentkg {

namespace {

bool is_word_byte(unsigned char c) {
  // Non-ASCII code points count as letters so accented names stay whole.
  return c >= 0x80 || is_ascii_alpha(static_cast<char>(c)) ||
         is_ascii_digit(static_cast<char>(c));
}

}  // namespace

InputSpan Tokenization::span_for_bytes(std::size_t begin,
                                       std::size_t end) const {
  int first = -1;
  int last = -1;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const bool inside = byte_begin[t] >= begin && byte_end[t] <= end;
    const bool overlaps = byte_begin[t] < end && byte_end[t] > begin;
    if (overlaps && !inside) {
      throw ArgumentError("byte interval cuts through token " +
                          std::to_string(t));
    }
    if (inside) {
      if (first < 0) first = static_cast<int>(t);
      last = static_cast<int>(t);
    }
  }
  if (first < 0) throw ArgumentError("byte interval covers no tokens");
  return InputSpan{first, last + 1};
}

ToyTokenizer::ToyTokenizer(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 3) throw ArgumentError("tokenizer needs vocab_size >= 3");
}

int ToyTokenizer::id_for(std::string_view piece) const {
  // Ids 0 and 1 are reserved for the sequence delimiters.
  const auto span = static_cast<std::uint64_t>(vocab_size_ - 2);
  return 2 + static_cast<int>(fnv1a64(piece) % span);
}

Tokenization ToyTokenizer::tokenize(std::string_view text) const {
  Tokenization out;
  auto push = [&](std::string piece, std::size_t b, std::size_t e) {
    out.tokens.ids.push_back(id_for(piece));
    out.tokens.texts.push_back(std::move(piece));
    out.byte_begin.push_back(b);
    out.byte_end.push_back(e);
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_ascii_space(static_cast<char>(c))) {
      ++i;
      continue;
    }
    if (!is_word_byte(c)) {
      const std::size_t len = std::min(utf8_sequence_length(c), text.size() - i);
      push(std::string(text.substr(i, len)), i, i + len);
      i += len;
      continue;
    }
    WordSpan word;
    word.byte_begin = i;
    word.token_begin = static_cast<int>(out.tokens.size());
    std::size_t piece_start = i;
    std::size_t piece_points = 0;
    while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) {
      if (piece_points == kPieceLength) {
        const bool first = piece_start == word.byte_begin;
        push((first ? "" : "##") +
                 std::string(text.substr(piece_start, i - piece_start)),
             piece_start, i);
        piece_start = i;
        piece_points = 0;
      }
      i += std::min(utf8_sequence_length(static_cast<unsigned char>(text[i])),
                    text.size() - i);
      ++piece_points;
    }
    const bool first = piece_start == word.byte_begin;
    push((first ? "" : "##") +
             std::string(text.substr(piece_start, i - piece_start)),
         piece_start, i);
    word.byte_end = i;
    word.token_end = static_cast<int>(out.tokens.size());
    word.text = std::string(text.substr(word.byte_begin, i - word.byte_begin));
    out.words.push_back(std::move(word));
  }
  return out;
}

}  // namespace latentkg
