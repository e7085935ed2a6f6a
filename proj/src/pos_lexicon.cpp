#include "latentkg/pos_lexicon.hpp"

#include "latentkg/text.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

namespace latentkg {

namespace {

constexpr PosTag N = PosTag::kNoun;
constexpr PosTag V = PosTag::kVerb;
constexpr PosTag O = PosTag::kOther;

// clang-format off
constexpr std::pair<std::string_view, PosTag> kLexicon[] = {
    // determiners, pronouns
    {"a", O}, {"an", O}, {"the", O}, {"this", O}, {"that", O}, {"these", O},
    {"those", O}, {"some", O}, {"any", O}, {"each", O}, {"every", O},
    {"no", O}, {"all", O}, {"both", O}, {"either", O}, {"neither", O},
    {"i", O}, {"you", O}, {"he", O}, {"she", O}, {"it", O}, {"we", O},
    {"they", O}, {"me", O}, {"him", O}, {"her", O}, {"us", O}, {"them", O},
    {"his", O}, {"its", O}, {"their", O}, {"our", O}, {"my", O}, {"your", O},
    {"who", O}, {"whom", O}, {"whose", O}, {"which", O}, {"what", O},
    // adpositions, conjunctions, particles
    {"of", O}, {"in", O}, {"on", O}, {"at", O}, {"by", O}, {"for", O},
    {"with", O}, {"to", O}, {"from", O}, {"as", O}, {"into", O},
    {"onto", O}, {"about", O}, {"after", O}, {"before", O}, {"during", O},
    {"since", O}, {"until", O}, {"over", O}, {"under", O}, {"between", O},
    {"through", O}, {"against", O}, {"without", O}, {"within", O},
    {"among", O}, {"across", O}, {"than", O}, {"and", O}, {"or", O},
    {"but", O}, {"nor", O}, {"if", O}, {"because", O}, {"while", O},
    {"although", O}, {"not", O}, {"s", O}, {"t", O},
    // auxiliaries and copulas
    {"is", O}, {"are", O}, {"was", O}, {"were", O}, {"be", O}, {"been", O},
    {"being", O}, {"am", O}, {"has", O}, {"have", O}, {"had", O},
    {"having", O}, {"do", O}, {"does", O}, {"did", O}, {"will", O},
    {"would", O}, {"can", O}, {"could", O}, {"shall", O}, {"should", O},
    {"may", O}, {"might", O}, {"must", O},
    // adverbs
    {"also", O}, {"only", O}, {"very", O}, {"still", O}, {"never", O},
    {"always", O}, {"often", O}, {"once", O}, {"again", O}, {"already", O},
    {"ever", O}, {"just", O}, {"even", O}, {"more", O}, {"most", O},
    {"less", O}, {"least", O}, {"there", O}, {"here", O}, {"then", O},
    {"now", O}, {"later", O}, {"currently", O}, {"mainly", O},
    // adjectives
    {"american", O}, {"british", O}, {"english", O}, {"german", O},
    {"french", O}, {"big", O}, {"small", O}, {"large", O}, {"new", O},
    {"old", O}, {"first", O}, {"last", O}, {"famous", O}, {"visual", O},
    {"global", O}, {"renewable", O}, {"major", O}, {"many", O},
    {"several", O}, {"other", O}, {"best", O}, {"high", O},
    {"low", O}, {"real", O}, {"animated", O}, {"holy", O}, {"roman", O},
    // verbs
    {"wrote", V}, {"write", V}, {"won", V}, {"win", V}, {"moved", V},
    {"move", V}, {"murdered", V}, {"founded", V}, {"crowned", V},
    {"kills", V}, {"kill", V}, {"killed", V}, {"born", V}, {"died", V},
    {"die", V}, {"became", V}, {"become", V}, {"made", V}, {"make", V},
    {"directed", V}, {"starred", V}, {"played", V}, {"plays", V},
    {"released", V}, {"created", V}, {"built", V}, {"lived", V},
    {"lives", V}, {"married", V}, {"ruled", V}, {"increasing", V},
    {"increases", V}, {"causes", V}, {"caused", V}, {"produced", V},
    {"signed", V}, {"joined", V}, {"formed", V}, {"located", V},
    {"works", V}, {"worked", V}, {"owns", V}, {"owned", V},
    {"leads", V}, {"led", V}, {"knew", V}, {"said", V},
    // nouns
    {"child", N}, {"emperor", N}, {"empress", N}, {"book", N},
    {"creator", N}, {"company", N}, {"effects", N}, {"election", N},
    {"band", N}, {"population", N}, {"people", N}, {"million", N},
    {"capital", N}, {"country", N}, {"city", N}, {"energy", N},
    {"investment", N}, {"jobs", N}, {"warming", N}, {"magnitude", N},
    {"frequency", N}, {"droughts", N}, {"floods", N}, {"day", N},
    {"film", N}, {"actor", N}, {"singer", N}, {"show", N},
};
// clang-format on

const std::unordered_map<std::string_view, PosTag>& lexicon() {
  static const auto* table = [] {
    auto* m = new std::unordered_map<std::string_view, PosTag>();
    for (const auto& [w, t] : kLexicon) m->emplace(w, t);
    return m;
  }();
  return *table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() + 1 &&
         s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

PosTag lexicon_tag(std::string_view word) {
  if (word.empty()) return PosTag::kOther;
  const std::string lower = ascii_lower(word);
  if (auto it = lexicon().find(lower); it != lexicon().end()) return it->second;
  if (std::all_of(word.begin(), word.end(), is_ascii_digit)) return PosTag::kOther;
  if (is_ascii_upper(word.front())) return PosTag::kProperNoun;
  if (ends_with(lower, "ed") || ends_with(lower, "ing")) return PosTag::kVerb;
  return PosTag::kNoun;
}

std::vector<TaggedWord> tag_words(std::span<const WordSpan> words) {
  std::vector<TaggedWord> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back({w.text, lexicon_tag(w.text)});
  return out;
}

Vectorf lexicon_weights(const Tokenization& tokenization, InputSpan input_span) {
  std::vector<WordSpan> inside;
  std::vector<TokenRange> alignment;
  for (const auto& w : tokenization.words) {
    if (w.token_begin >= input_span.start && w.token_end <= input_span.end) {
      inside.push_back(w);
      alignment.push_back({w.token_begin, w.token_end});
    }
  }
  const auto tagged = tag_words(inside);
  return compute_pos_weights(tagged, alignment, input_span);
}

}  // namespace latentkg
