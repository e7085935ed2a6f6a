#pragma once

#include "latentkg/common.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace latentkg {

/// An asserted or negated predicate over one or two constant arguments.
struct GroundLiteral {
  bool negated = false;
  std::string predicate;
  std::vector<std::string> args;  // trimmed, non-empty

  friend bool operator==(const GroundLiteral&, const GroundLiteral&) = default;
};

struct StructuredOutput {
  bool label = false;
  std::vector<std::string> facts;
  std::vector<GroundLiteral> literals;  // all facts' conjuncts, in order

  friend bool operator==(const StructuredOutput&, const StructuredOutput&) = default;
};

enum class InvalidReason {
  kNoObject,
  kMalformedObject,
  kMissingLabel,
  kMissingFacts,
  kEmptyFact,
  kMalformedLiteral,
  kBadArity,
};

std::string_view to_string(InvalidReason reason);

struct Invalid {
  std::string raw_text;  // verbatim input
  InvalidReason reason = InvalidReason::kNoObject;
  std::string detail;
};

using ParseOutcome = std::variant<StructuredOutput, Invalid>;

inline bool is_valid(const ParseOutcome& outcome) {
  return std::holds_alternative<StructuredOutput>(outcome);
}

/// Parses model output of the form {"label": <bool>, "facts": [<string>...]}.
/// Prose around the object is ignored; the first balanced {...} is used.
/// Facts split on "∧", "^" or the word AND outside parentheses. Never throws.
ParseOutcome parse_structured(std::string_view text) noexcept;

/// One conjunct such as `¬AuthorOf(Hamlet, Edgar Allan Poe)`. Accepted
/// negations: "¬", "~" and a leading "not " in any case.
std::variant<GroundLiteral, InvalidReason> parse_literal(std::string_view text);

/// Conjuncts of a fact string, split at depth-0 conjunction symbols and
/// trimmed. Empty conjuncts are kept so callers can reject them.
std::vector<std::string> split_conjunction(std::string_view fact);

// Canonical forms: "¬" for negation, ", " between args, " ∧ " between
// conjuncts.
std::string render_literal(const GroundLiteral& literal);
std::string render_structured(const StructuredOutput& output);

/// "MusicGenreOf" -> "music genre of". Splits at lower/upper and letter/digit
/// transitions and inside acronyms ("USPresident" -> "us president").
/// Idempotent on its own output.
std::string decamelize(std::string_view name);

enum class Polarity { kAsserted, kNegated };

struct SpoTriple {
  std::string subject;
  std::string relation;  // never contains the negation
  std::string object;
  Polarity polarity = Polarity::kAsserted;
  int layer = kInferenceLayer;

  /// Relation as printed: "not author of", "is not", "was not".
  std::string rendered_relation() const;

  friend bool operator==(const SpoTriple&, const SpoTriple&) = default;
};

/// Rewriting rules:
///   P(a, b)       -> <a, decamelize(P), b>
///   IsQ(a)        -> <a, is, decamelize(Q)>  for copulas is/was/are/were/has/had
///   Q(a)          -> <a, is, decamelize(Q)>
/// Negation sets the polarity only.
SpoTriple literal_to_triple(const GroundLiteral& literal, int layer = kInferenceLayer);

std::vector<SpoTriple> triples_of(const StructuredOutput& output, int layer);

}  // namespace latentkg
