#include "latentkg/literal_parse.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <random>

namespace latentkg {
namespace {

// Returns by value: callers pass temporaries.
StructuredOutput structured(const ParseOutcome& o) {
  if (const auto* s = std::get_if<StructuredOutput>(&o)) return *s;
  const auto& inv = std::get<Invalid>(o);
  throw std::runtime_error("invalid (" + std::string(to_string(inv.reason)) + "): " + inv.detail);
}

InvalidReason reason_of(const ParseOutcome& o) { return std::get<Invalid>(o).reason; }

TEST(ParseStructured, ConjunctionOfTwoLiterals) {
  const auto& s = structured(parse_structured(
      R"j({"label": true, "facts": ["IsBand(The Beatles) ∧ MusicGenreOf(The Beatles, Rock)"]})j"));
  EXPECT_TRUE(s.label);
  ASSERT_EQ(s.literals.size(), 2u);
  EXPECT_EQ(s.literals[1].predicate, "MusicGenreOf");
  EXPECT_EQ(s.literals[1].args, (std::vector<std::string>{"The Beatles", "Rock"}));
}

TEST(ParseStructured, NegatedSecondLiteral) {
  const auto& s = structured(parse_structured(
      R"j({"label": false, "facts": ["AuthorOf(Hamlet, William Shakespeare) ∧ ¬AuthorOf(Hamlet, Edgar Allan Poe)"]})j"));
  EXPECT_FALSE(s.label);
  ASSERT_EQ(s.literals.size(), 2u);
  EXPECT_FALSE(s.literals[0].negated);
  EXPECT_TRUE(s.literals[1].negated);
}

TEST(ParseStructured, ApologyIsNoObject) {
  const auto o = parse_structured("I apologize, but I'm a large language model, I cannot provide");
  EXPECT_EQ(reason_of(o), InvalidReason::kNoObject);
  EXPECT_EQ(std::get<Invalid>(o).raw_text,
            "I apologize, but I'm a large language model, I cannot provide");
}

TEST(ParseStructured, ProseAroundFirstObject) {
  const auto& s = structured(parse_structured(
      "Sure! Here it is: {\"label\": true, \"facts\": [\"IsCity(Berlin)\"]} and {\"label\": false}"));
  EXPECT_TRUE(s.label);
  EXPECT_EQ(s.literals.size(), 1u);
}

TEST(ParseStructured, BracesInsideStringsDoNotCloseObject) {
  const auto& s = structured(
      parse_structured(R"j({"label": true, "facts": ["NameOf(X, a}b)"]})j"));
  EXPECT_EQ(s.literals[0].args[1], "a}b");
}

TEST(ParseStructured, ConjunctionSpellings) {
  for (const char* fact : {"A(x) ∧ B(y)", "A(x) ^ B(y)", "A(x) AND B(y)", "A(x)∧B(y)"}) {
    const std::string text = std::string(R"({"label": true, "facts": [")") + fact + "\"]}";
    const auto& s = structured(parse_structured(text));
    ASSERT_EQ(s.literals.size(), 2u) << fact;
    EXPECT_EQ(s.literals[1].predicate, "B");
  }
  // "AND" inside a word or an argument is not a conjunction.
  const auto& s = structured(parse_structured(R"j({"label": true, "facts": ["Has(Batman And Robin)"]})j"));
  EXPECT_EQ(s.literals.size(), 1u);
  const auto& t = structured(parse_structured(R"j({"label": true, "facts": ["BRANDOf(x)"]})j"));
  EXPECT_EQ(t.literals.size(), 1u);
}

TEST(ParseStructured, NegationSpellings) {
  for (const char* lit : {"¬P(a)", "~P(a)", "not P(a)", "NOT P(a)", "¬ P(a)"}) {
    const auto r = parse_literal(lit);
    ASSERT_TRUE(std::holds_alternative<GroundLiteral>(r)) << lit;
    EXPECT_TRUE(std::get<GroundLiteral>(r).negated) << lit;
    EXPECT_EQ(std::get<GroundLiteral>(r).predicate, "P");
  }
  // A predicate that merely starts with "not" stays asserted.
  const auto r = parse_literal("NotableFor(a, b)");
  ASSERT_TRUE(std::holds_alternative<GroundLiteral>(r));
  EXPECT_FALSE(std::get<GroundLiteral>(r).negated);
}

TEST(ParseStructured, InvalidReasons) {
  EXPECT_EQ(reason_of(parse_structured("{not json}")), InvalidReason::kMalformedObject);
  EXPECT_EQ(reason_of(parse_structured(R"({"facts": []})")), InvalidReason::kMissingLabel);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": "true", "facts": []})")),
            InvalidReason::kMissingLabel);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true})")), InvalidReason::kMissingFacts);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true, "facts": [1]})")),
            InvalidReason::kMissingFacts);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true, "facts": [""]})")),
            InvalidReason::kEmptyFact);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true, "facts": ["A(x) ∧ "]})")),
            InvalidReason::kEmptyFact);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true, "facts": ["IsCity Berlin"]})")),
            InvalidReason::kMalformedLiteral);
  EXPECT_EQ(reason_of(parse_structured(R"j({"label": true, "facts": ["P(a, )"]})j")),
            InvalidReason::kMalformedLiteral);
  EXPECT_EQ(reason_of(parse_structured(R"({"label": true, "facts": ["P(a) trailing"]})")),
            InvalidReason::kMalformedLiteral);
  EXPECT_EQ(reason_of(parse_structured(R"j({"label": true, "facts": ["Between(a, b, c)"]})j")),
            InvalidReason::kBadArity);
  EXPECT_EQ(reason_of(parse_structured(R"j({"label": true, "facts": ["P()"]})j")),
            InvalidReason::kMalformedLiteral);
}

TEST(ParseStructured, EmptyFactListIsValid) {
  const auto& s = structured(parse_structured(R"({"label": false, "facts": []})"));
  EXPECT_FALSE(s.label);
  EXPECT_TRUE(s.literals.empty());
}

TEST(ParseStructured, NestedParenthesesKeptInArgument) {
  const auto& s = structured(
      parse_structured(R"j({"label": true, "facts": ["IsPerson(Empress Willy (The))"]})j"));
  EXPECT_EQ(s.literals[0].args, (std::vector<std::string>{"Empress Willy (The)"}));
}

TEST(ParseStructured, NeverThrowsOnRandomBytes) {
  std::mt19937 gen(11);
  const std::string alphabet = "{}[]()\",:^~¬∧ ANDaxP1\\\n";
  for (int trial = 0; trial < 5000; ++trial) {
    std::string s;
    const int n = static_cast<int>(gen() % 64);
    for (int i = 0; i < n; ++i) {
      if (gen() % 3 == 0) {
        s.push_back(static_cast<char>(gen() % 256));
      } else {
        s.push_back(alphabet[gen() % alphabet.size()]);
      }
    }
    if (trial % 2 == 0) s = "{\"label\": true, \"facts\": [\"" + s + "\"]}";
    const ParseOutcome o = parse_structured(s);
    if (const auto* inv = std::get_if<Invalid>(&o)) {
      EXPECT_EQ(inv->raw_text, s);
    }
  }
}

TEST(ParseStructured, RenderRoundTrip) {
  const std::string messy =
      R"j(  {"facts": ["IsCity( Berlin )^CountryOf(Berlin,Germany)", "not   AuthorOf(Hamlet,  Poe) AND IsPlay(Hamlet)"], "label": true} )j";
  const auto& s = structured(parse_structured(messy));
  const std::string canonical = render_structured(s);
  EXPECT_EQ(canonical,
            R"j({"label": true, "facts": ["IsCity(Berlin) ∧ CountryOf(Berlin, Germany)", "¬AuthorOf(Hamlet, Poe) ∧ IsPlay(Hamlet)"]})j");
  const auto& again = structured(parse_structured(canonical));
  EXPECT_EQ(again.literals, s.literals);
  EXPECT_EQ(render_structured(again), canonical);
}

TEST(Decamelize, Examples) {
  EXPECT_EQ(decamelize("MusicGenreOf"), "music genre of");
  EXPECT_EQ(decamelize("is"), "is");
  EXPECT_EQ(decamelize("BecamePresidentOf"), "became president of");
  EXPECT_EQ(decamelize("isFormerUSPresident"), "is former us president");
  EXPECT_EQ(decamelize("YearOfBirth2"), "year of birth 2");
  EXPECT_EQ(decamelize("has_part"), "has part");
  for (const char* n : {"MusicGenreOf", "KilledByJoker", "isFormerUSPresident", "Q3Results"}) {
    EXPECT_EQ(decamelize(decamelize(n)), decamelize(n)) << n;
  }
}

GroundLiteral lit(std::string pred, std::vector<std::string> args, bool neg = false) {
  return {neg, std::move(pred), std::move(args)};
}

TEST(Rewrite, BinaryNegated) {
  const SpoTriple t = literal_to_triple(lit("AuthorOf", {"Hamlet", "Edgar Allan Poe"}, true));
  EXPECT_EQ(t.subject, "Hamlet");
  EXPECT_EQ(t.relation, "author of");
  EXPECT_EQ(t.object, "Edgar Allan Poe");
  EXPECT_EQ(t.polarity, Polarity::kNegated);
  EXPECT_EQ(t.rendered_relation(), "not author of");
}

TEST(Rewrite, UnaryCopulaSplit) {
  const SpoTriple city = literal_to_triple(lit("IsCity", {"Berlin"}));
  EXPECT_EQ(city, (SpoTriple{"Berlin", "is", "city", Polarity::kAsserted, kInferenceLayer}));
  const SpoTriple queen = literal_to_triple(lit("WasQueen", {"Mary Queen of Scots"}));
  EXPECT_EQ(queen.relation, "was");
  EXPECT_EQ(queen.object, "queen");
  const SpoTriple neg = literal_to_triple(lit("IsInEurope", {"Mexico"}, true));
  EXPECT_EQ(neg.object, "in europe");
  EXPECT_EQ(neg.rendered_relation(), "is not");
  const SpoTriple former = literal_to_triple(lit("isFormerUSPresident", {"George W. Bush"}));
  EXPECT_EQ(former.object, "former us president");
}

TEST(Rewrite, UnaryWithoutCopulaUsesIs) {
  const SpoTriple t = literal_to_triple(lit("AnimatedShow", {"BoJack Horseman"}));
  EXPECT_EQ(t.relation, "is");
  EXPECT_EQ(t.object, "animated show");
  // A bare copula has nothing to split off.
  const SpoTriple bare = literal_to_triple(lit("Is", {"Berlin"}));
  EXPECT_EQ(bare.relation, "is");
  EXPECT_EQ(bare.object, "is");
  // "Island" starts with the letters of "is" but not with the word.
  EXPECT_EQ(literal_to_triple(lit("Island", {"Crete"})).object, "island");
}

TEST(Rewrite, LayerCarried) {
  const auto& s = structured(parse_structured(R"j({"label": true, "facts": ["IsCity(Berlin)"]})j"));
  const auto triples = triples_of(s, 7);
  ASSERT_EQ(triples.size(), 1u);
  EXPECT_EQ(triples[0].layer, 7);
}

// Published example outputs.

TEST(ExampleOutputs, SourcePromptExample) {
  const auto text = testing::slurp(testing::fixture("source_example_output.txt"));
  const auto& s = structured(parse_structured(text));
  EXPECT_TRUE(s.label);
  EXPECT_EQ(s.facts.size(), 3u);
  EXPECT_EQ(s.literals.size(), 4u);
  const SpoTriple t = literal_to_triple(s.literals[3]);
  EXPECT_EQ(t.relation, "became president of");
}

TEST(ExampleOutputs, TargetPromptExamples) {
  const auto lines = testing::lines_of(testing::fixture("target_example_outputs.txt"));
  ASSERT_EQ(lines.size(), 3u);
  const std::vector<std::pair<std::size_t, std::size_t>> want{{2, 4}, {3, 4}, {2, 4}};
  const std::vector<bool> labels{true, false, true};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& s = structured(parse_structured(lines[i]));
    EXPECT_EQ(s.label, labels[i]) << i;
    EXPECT_EQ(s.facts.size(), want[i].first) << i;
    EXPECT_EQ(s.literals.size(), want[i].second) << i;
  }
}

TEST(ExampleOutputs, ItalicRowsInvalidOthersValid) {
  int italic = 0;
  for (const auto& line : testing::lines_of(testing::fixture("layer_outputs_3claims.jsonl"))) {
    const auto row = nlohmann::json::parse(line);
    const auto o = parse_structured(row["text"].get<std::string>());
    const bool is_italic = row["italic"].get<bool>();
    italic += is_italic ? 1 : 0;
    EXPECT_EQ(is_valid(o), !is_italic) << "claim " << row["claim"] << " layer " << row["layer"];
    if (is_italic) {
      EXPECT_EQ(reason_of(o), InvalidReason::kNoObject);
    }
  }
  EXPECT_EQ(italic, 45);
}

}  // namespace
}  // namespace latentkg
