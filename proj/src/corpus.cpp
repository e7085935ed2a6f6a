#include "latentkg/corpus.hpp"

#include "latentkg/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace latentkg {

namespace {

using nlohmann::json;

// Prompt templates, verbatim. Note the double space in "presented  as".
constexpr std::string_view kSource =
    "<s>[INST] <<SYS>>\n"
    "You are a journalist with expertise in fact-checking. Your role is to evaluate the "
    "truthfulness of factual claims. To uphold journalistic integrity, you must produce a "
    "report containing a binary assessment and all the factual information that supports "
    "your evaluation. Each factual information should be presented  as zeroth-order logic "
    "propositions.\n"
    "<</SYS>>\n"
    "\n"
    "George W. Bush won a presidential election [/INST] {\"label\": true, \"facts\": "
    "[\"isPolitician(George W. Bush) \xE2\x88\xA7 isFormerUSPresident(George W. Bush)\","
    "\"ParticipatedIn(2000 United States presidential election, George W. Bush)\","
    "\"BecamePresidentOf(United States of America, George W. Bush)\"]} "
    "</s><s>[INST] $INPUT [/INST]";

constexpr std::string_view kTarget =
    "<s>[INST] <<SYS>>\n"
    "You are an assistant with expertise in fact-checking. Your role is to assess claims "
    "using zeroth-order logic propositions.\n"
    "<</SYS>>\n"
    "\n"
    "Berlin is the capital of Germany [/INST] {\"label\": true, \"facts\": "
    "[\"IsCity(Berlin) \xE2\x88\xA7 CountryOf(Berlin, Germany)\", "
    "\"IsCountry(Germany) \xE2\x88\xA7 CapitalOf(Germany, Berlin)\"]} "
    "</s><s>[INST] Edgar Allan Poe wrote Hamlet [/INST] {\"label\": false, \"facts\": "
    "[\"isWriter(Edgar Allan Poe)\", \"IsPlay(Hamlet)\", "
    "\"AuthorOf(Hamlet, William Shakespeare) \xE2\x88\xA7 \xC2\xAC"
    "AuthorOf(Hamlet, Edgar Allan Poe)\"]} "
    "</s><s>[INST] The Beatles were a rock band from England [/INST] {\"label\": true, "
    "\"facts\": [\"IsBand(The Beatles) \xE2\x88\xA7 MusicGenreOf(The Beatles, Rock)\", "
    "\"OriginOf(The Beatles, Liverpool) \xE2\x88\xA7 CountryOf(Liverpool, England)\"]} "
    "</s><s>[INST] x [/INST]";

constexpr std::string_view kInputSlot = "$INPUT";

std::string label_key(std::string_view text) {
  std::string k;
  for (char c : trim(text)) {
    if (c == ' ' || c == '-') c = '_';
    k += is_ascii_upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return k;
}

}  // namespace

GoldLabel parse_gold_label(std::string_view text) {
  static const std::map<std::string, GoldLabel> kAliases = {
      {"supported", GoldLabel::kSupported},
      {"supports", GoldLabel::kSupported},
      {"support", GoldLabel::kSupported},
      {"true", GoldLabel::kSupported},
      {"refuted", GoldLabel::kRefuted},
      {"refutes", GoldLabel::kRefuted},
      {"refute", GoldLabel::kRefuted},
      {"false", GoldLabel::kRefuted},
      {"not_enough_info", GoldLabel::kNotEnoughInfo},
      {"notenoughinfo", GoldLabel::kNotEnoughInfo},
      {"nei", GoldLabel::kNotEnoughInfo},
  };
  auto it = kAliases.find(label_key(text));
  if (it == kAliases.end()) throw FormatError("unknown label '" + std::string(text) + "'");
  return it->second;
}

std::string_view to_string(GoldLabel label) {
  switch (label) {
    case GoldLabel::kSupported: return "supported";
    case GoldLabel::kRefuted: return "refuted";
    case GoldLabel::kNotEnoughInfo: return "not_enough_info";
  }
  return "not_enough_info";
}

std::vector<ClaimRecord> parse_claims(std::string_view jsonl) {
  std::vector<ClaimRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = "claims line " + std::to_string(line_no);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError(where + ": not a JSON object");
    ClaimRecord r;
    const auto id = j.find("id");
    if (id == j.end()) throw FormatError(where + ": missing field 'id'");
    if (id->is_string()) {
      r.id = id->get<std::string>();
    } else if (id->is_number_integer()) {
      r.id = std::to_string(id->get<long long>());
    } else {
      throw FormatError(where + ": field 'id' must be a string or integer");
    }
    if (r.id.empty()) throw FormatError(where + ": field 'id' is empty");
    const auto claim = j.find("claim");
    if (claim == j.end() || !claim->is_string()) {
      throw FormatError(where + ": missing string field 'claim'");
    }
    r.text = claim->get<std::string>();
    if (trim(r.text).empty()) throw FormatError(where + ": field 'claim' is empty");
    const auto label = j.find("label");
    if (label == j.end() || !label->is_string()) {
      throw FormatError(where + ": missing string field 'label'");
    }
    try {
      r.gold = parse_gold_label(label->get<std::string>());
    } catch (const FormatError& e) {
      throw FormatError(where + ": " + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ClaimRecord> load_claims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_claims(ss.str());
}

std::string format_claims(const std::vector<ClaimRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["claim"] = r.text;
    j["label"] = std::string(to_string(r.gold));
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ClaimRecord> filter_claims(const std::vector<ClaimRecord>& records) {
  std::vector<ClaimRecord> out;
  for (const auto& r : records) {
    if (r.gold == GoldLabel::kNotEnoughInfo) continue;
    const std::size_t n = codepoint_count(r.text);
    if (n >= kMinClaimLength && n <= kMaxClaimLength) out.push_back(r);
  }
  return out;
}

std::vector<ClaimRecord> sample_claims(const std::vector<ClaimRecord>& records, std::size_t n,
                                       std::uint64_t seed) {
  if (n > records.size()) {
    throw ArgumentError("cannot sample " + std::to_string(n) + " of " +
                        std::to_string(records.size()) + " claims");
  }
  std::vector<ClaimRecord> pool = records;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

std::map<GoldLabel, std::size_t> class_counts(const std::vector<ClaimRecord>& records) {
  std::map<GoldLabel, std::size_t> counts;
  for (const auto& r : records) ++counts[r.gold];
  return counts;
}

std::string_view source_template() { return kSource; }
std::string_view target_template() { return kTarget; }

PromptBundle build_prompts(std::string_view claim) {
  if (trim(claim).empty()) throw ArgumentError("claim text is empty");
  // A standalone "x" would tokenize exactly like the placeholder.
  for (std::size_t i = 0; i < claim.size();) {
    if (!is_ascii_alpha(claim[i]) && !is_ascii_digit(claim[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < claim.size() && (is_ascii_alpha(claim[j]) || is_ascii_digit(claim[j]))) ++j;
    if (claim.substr(i, j - i) == kPlaceholder) {
      throw EscapingError("claim contains the placeholder word '" + std::string(kPlaceholder) +
                          "'");
    }
    i = j;
  }
  PromptBundle b;
  const std::size_t slot = kSource.find(kInputSlot);
  b.source_text = std::string(kSource.substr(0, slot));
  b.claim_begin = b.source_text.size();
  b.source_text += claim;
  b.claim_end = b.source_text.size();
  b.source_text += kSource.substr(slot + kInputSlot.size());
  b.target_text = std::string(kTarget);
  return b;
}

}  // namespace latentkg
