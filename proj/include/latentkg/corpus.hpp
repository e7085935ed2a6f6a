#pragma once

#include "latentkg/common.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

enum class GoldLabel { kSupported, kRefuted, kNotEnoughInfo };

/// Case-insensitive; spaces, hyphens and underscores are interchangeable.
///   supported:       supported, supports, support, true
///   refuted:         refuted, refutes, refute, false
///   not_enough_info: not_enough_info, not enough info, notenoughinfo, nei
/// Anything else (e.g. DISPUTED) throws FormatError.
GoldLabel parse_gold_label(std::string_view text);
std::string_view to_string(GoldLabel label);

struct ClaimRecord {
  std::string id;
  std::string text;
  GoldLabel gold = GoldLabel::kSupported;

  friend bool operator==(const ClaimRecord&, const ClaimRecord&) = default;
};

/// One JSON object per line with fields id (string or integer), claim and
/// label. Blank lines are skipped; errors name the 1-based line.
std::vector<ClaimRecord> parse_claims(std::string_view jsonl);
std::vector<ClaimRecord> load_claims(const std::filesystem::path& path);
std::string format_claims(const std::vector<ClaimRecord>& records);

inline constexpr std::size_t kMinClaimLength = 35;
inline constexpr std::size_t kMaxClaimLength = 120;

/// Drops not-enough-info claims and keeps 35 <= code points <= 120.
std::vector<ClaimRecord> filter_claims(const std::vector<ClaimRecord>& records);

/// Uniform sample without replacement: the first n entries of a seeded
/// Fisher-Yates shuffle. Throws ArgumentError when n exceeds the input.
std::vector<ClaimRecord> sample_claims(const std::vector<ClaimRecord>& records, std::size_t n,
                                       std::uint64_t seed);

std::map<GoldLabel, std::size_t> class_counts(const std::vector<ClaimRecord>& records);

inline constexpr std::string_view kPlaceholder = "x";

/// Source prompt with "$INPUT" as the claim slot.
std::string_view source_template();
/// Target prompt containing the placeholder once.
std::string_view target_template();

class EscapingError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

struct PromptBundle {
  std::string source_text;
  std::string target_text;
  std::string placeholder{kPlaceholder};
  std::size_t claim_begin = 0;  // byte interval of the claim in source_text
  std::size_t claim_end = 0;
};

/// Throws ArgumentError for an empty claim and EscapingError when the claim
/// has "x" as a standalone word, which would collide with the placeholder.
PromptBundle build_prompts(std::string_view claim);

}  // namespace latentkg
