#pragma once

#include "latentkg/patching.hpp"
#include "latentkg/tokenizer.hpp"

#include <string_view>
#include <vector>

namespace latentkg {

/// Small closed-class lexicon tagger for fixtures and the toy pipeline.
/// Lexicon hits win; otherwise capitalized words are PROPN, numbers are
/// other, words ending in "ed" or "ing" are VERB and the rest NOUN.
PosTag lexicon_tag(std::string_view word);

std::vector<TaggedWord> tag_words(std::span<const WordSpan> words);

/// Tags the words of a tokenized claim and returns their weights over
/// `input_span`. Only words entirely inside the span take part.
Vectorf lexicon_weights(const Tokenization& tokenization, InputSpan input_span);

}  // namespace latentkg
