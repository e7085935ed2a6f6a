#include "latentkg/literal_parse.hpp"

#include "latentkg/text.hpp"

#include <json.hpp>

#include <array>

namespace latentkg {

namespace {

using nlohmann::json;

constexpr std::string_view kNegationSign = "\xC2\xAC";  // U+00AC
constexpr std::string_view kWedge = "\xE2\x88\xA7";     // U+2227

bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) {
  return s.substr(pos, prefix.size()) == prefix;
}

bool is_ident_start(char c) { return is_ascii_alpha(c) || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_ascii_digit(c); }

// Extent of the first balanced {...}, skipping braces inside JSON strings.
std::optional<std::string_view> first_object(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (c == '\\') {
          ++i;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        return text.substr(open, i - open + 1);
      }
    }
  }
  return std::nullopt;
}

// Length of the conjunction symbol at `pos`, 0 if none.
std::size_t conjunction_at(std::string_view s, std::size_t pos) {
  if (starts_with_at(s, pos, kWedge)) return kWedge.size();
  if (s[pos] == '^') return 1;
  if (starts_with_at(s, pos, "AND")) {
    const bool left = pos == 0 || !is_ident_char(s[pos - 1]);
    const bool right = pos + 3 >= s.size() || !is_ident_char(s[pos + 3]);
    if (left && right) return 3;
  }
  return 0;
}

Invalid make_invalid(std::string_view raw, InvalidReason reason, std::string detail) {
  return Invalid{std::string(raw), reason, std::move(detail)};
}

ParseOutcome parse_impl(std::string_view text) {
  const auto object = first_object(text);
  if (!object) return make_invalid(text, InvalidReason::kNoObject, "no balanced {...}");
  const json j = json::parse(*object, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return make_invalid(text, InvalidReason::kMalformedObject, "object is not valid JSON");
  }
  const auto label = j.find("label");
  if (label == j.end() || !label->is_boolean()) {
    return make_invalid(text, InvalidReason::kMissingLabel, "no boolean 'label'");
  }
  const auto facts = j.find("facts");
  if (facts == j.end() || !facts->is_array()) {
    return make_invalid(text, InvalidReason::kMissingFacts, "no array 'facts'");
  }
  StructuredOutput out;
  out.label = label->get<bool>();
  for (const auto& f : *facts) {
    if (!f.is_string()) {
      return make_invalid(text, InvalidReason::kMissingFacts, "fact is not a string");
    }
    std::string fact = f.get<std::string>();
    if (trim(fact).empty()) {
      return make_invalid(text, InvalidReason::kEmptyFact, "empty fact");
    }
    for (const auto& conjunct : split_conjunction(fact)) {
      if (conjunct.empty()) {
        return make_invalid(text, InvalidReason::kEmptyFact, "empty conjunct in '" + fact + "'");
      }
      auto lit = parse_literal(conjunct);
      if (auto* reason = std::get_if<InvalidReason>(&lit)) {
        return make_invalid(text, *reason, "literal '" + conjunct + "'");
      }
      out.literals.push_back(std::move(std::get<GroundLiteral>(lit)));
    }
    out.facts.push_back(std::move(fact));
  }
  return out;
}

}  // namespace

std::string_view to_string(InvalidReason reason) {
  switch (reason) {
    case InvalidReason::kNoObject: return "no-object";
    case InvalidReason::kMalformedObject: return "malformed-object";
    case InvalidReason::kMissingLabel: return "missing-label";
    case InvalidReason::kMissingFacts: return "missing-facts";
    case InvalidReason::kEmptyFact: return "empty-fact";
    case InvalidReason::kMalformedLiteral: return "malformed-literal";
    case InvalidReason::kBadArity: return "bad-arity";
  }
  return "unknown";
}

ParseOutcome parse_structured(std::string_view text) noexcept {
  try {
    return parse_impl(text);
  } catch (...) {
    try {
      return make_invalid(text, InvalidReason::kMalformedObject, "internal parse failure");
    } catch (...) {
      return Invalid{};
    }
  }
}

std::vector<std::string> split_conjunction(std::string_view fact) {
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < fact.size();) {
    const char c = fact[i];
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      depth = std::max(0, depth - 1);
    } else if (depth == 0) {
      if (const std::size_t n = conjunction_at(fact, i)) {
        parts.push_back(trim(fact.substr(start, i - start)));
        i += n;
        start = i;
        continue;
      }
    }
    ++i;
  }
  parts.push_back(trim(fact.substr(start)));
  return parts;
}

std::variant<GroundLiteral, InvalidReason> parse_literal(std::string_view text) {
  const std::string s = trim(text);
  std::size_t pos = 0;
  GroundLiteral lit;
  if (starts_with_at(s, 0, kNegationSign)) {
    lit.negated = true;
    pos = kNegationSign.size();
  } else if (starts_with_at(s, 0, "~")) {
    lit.negated = true;
    pos = 1;
  } else if (s.size() > 4 && ascii_lower(s.substr(0, 4)) == "not ") {
    lit.negated = true;
    pos = 4;
  }
  while (pos < s.size() && is_ascii_space(s[pos])) ++pos;

  const std::size_t ident_begin = pos;
  if (pos >= s.size() || !is_ident_start(s[pos])) return InvalidReason::kMalformedLiteral;
  while (pos < s.size() && is_ident_char(s[pos])) ++pos;
  lit.predicate = s.substr(ident_begin, pos - ident_begin);
  while (pos < s.size() && is_ascii_space(s[pos])) ++pos;
  if (pos >= s.size() || s[pos] != '(') return InvalidReason::kMalformedLiteral;

  // Arguments run to the matching close; nested parentheses stay in the arg.
  int depth = 0;
  std::size_t arg_begin = pos + 1;
  std::size_t close = std::string::npos;
  for (std::size_t i = pos; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth == 0) {
        lit.args.push_back(trim(std::string_view(s).substr(arg_begin, i - arg_begin)));
        close = i;
        break;
      }
    } else if (c == ',' && depth == 1) {
      lit.args.push_back(trim(std::string_view(s).substr(arg_begin, i - arg_begin)));
      arg_begin = i + 1;
    }
  }
  if (close == std::string::npos) return InvalidReason::kMalformedLiteral;
  if (!trim(std::string_view(s).substr(close + 1)).empty()) {
    return InvalidReason::kMalformedLiteral;
  }
  for (const auto& a : lit.args) {
    if (a.empty()) return InvalidReason::kMalformedLiteral;
  }
  if (lit.args.size() > 2) return InvalidReason::kBadArity;
  return lit;
}

std::string render_literal(const GroundLiteral& literal) {
  std::string out = literal.negated ? std::string(kNegationSign) : std::string();
  out += literal.predicate;
  out += '(';
  for (std::size_t i = 0; i < literal.args.size(); ++i) {
    if (i) out += ", ";
    out += literal.args[i];
  }
  return out + ')';
}

std::string render_structured(const StructuredOutput& output) {
  std::string out = R"({"label": )";
  out += output.label ? "true" : "false";
  out += R"(, "facts": [)";
  for (std::size_t i = 0; i < output.facts.size(); ++i) {
    if (i) out += ", ";
    const auto conjuncts = split_conjunction(output.facts[i]);
    std::string fact;
    for (std::size_t c = 0; c < conjuncts.size(); ++c) {
      if (c) fact += " " + std::string(kWedge) + " ";
      auto lit = parse_literal(conjuncts[c]);
      if (auto* g = std::get_if<GroundLiteral>(&lit)) {
        fact += render_literal(*g);
      } else {
        fact += collapse_whitespace(conjuncts[c]);
      }
    }
    out += json(fact).dump();
  }
  return out + "]}";
}

std::string decamelize(std::string_view name) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    const auto u = static_cast<unsigned char>(c);
    const bool alnum = is_ascii_alpha(c) || is_ascii_digit(c) || u >= 0x80;
    if (!alnum) {
      flush();
      continue;
    }
    if (!current.empty()) {
      const char prev = name[i - 1];
      const bool next_lower = i + 1 < name.size() && is_ascii_lower(name[i + 1]);
      const bool split =
          (is_ascii_upper(c) && (is_ascii_lower(prev) || is_ascii_digit(prev))) ||
          (is_ascii_upper(c) && is_ascii_upper(prev) && next_lower) ||
          (is_ascii_digit(c) && is_ascii_alpha(prev)) ||
          (is_ascii_alpha(c) && is_ascii_digit(prev));
      if (split) flush();
    }
    current += is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
  }
  flush();
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::string SpoTriple::rendered_relation() const {
  if (polarity == Polarity::kAsserted) return relation;
  static constexpr std::array<std::string_view, 6> kCopulas = {"is", "was", "are",
                                                                "were", "has", "had"};
  for (auto c : kCopulas) {
    if (relation == c) return relation + " not";
  }
  return "not " + relation;
}

SpoTriple literal_to_triple(const GroundLiteral& literal, int layer) {
  SpoTriple t;
  t.polarity = literal.negated ? Polarity::kNegated : Polarity::kAsserted;
  t.layer = layer;
  const std::string words = decamelize(literal.predicate);
  t.subject = literal.args.at(0);
  if (literal.args.size() == 2) {
    t.relation = words;
    t.object = literal.args[1];
    return t;
  }
  const std::size_t space = words.find(' ');
  const std::string head = words.substr(0, space);
  for (std::string_view c : {"is", "was", "are", "were", "has", "had"}) {
    if (space != std::string::npos && head == c) {
      t.relation = head;
      t.object = words.substr(space + 1);
      return t;
    }
  }
  t.relation = "is";
  t.object = words;
  return t;
}

std::vector<SpoTriple> triples_of(const StructuredOutput& output, int layer) {
  std::vector<SpoTriple> out;
  out.reserve(output.literals.size());
  for (const auto& lit : output.literals) out.push_back(literal_to_triple(lit, layer));
  return out;
}

}  // namespace latentkg
