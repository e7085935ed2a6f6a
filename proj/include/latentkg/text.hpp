#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latentkg {

/// Number of Unicode scalar values in a UTF-8 string. Continuation bytes are
/// not counted, so malformed input still yields a finite count.
std::size_t codepoint_count(std::string_view text);

/// Byte length of the UTF-8 sequence starting with `lead`, 1 for stray bytes.
std::size_t utf8_sequence_length(unsigned char lead);

std::string ascii_lower(std::string_view text);
std::string trim(std::string_view text);
std::string collapse_whitespace(std::string_view text);

/// Node identity key: case-fold, trim, collapse internal whitespace.
std::string normalize_entity(std::string_view text);

bool is_ascii_space(char c);
bool is_ascii_alpha(char c);
bool is_ascii_digit(char c);
bool is_ascii_upper(char c);
bool is_ascii_lower(char c);

std::vector<std::string> split_words(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Shortest decimal that reads back to the same double; "nan"/"inf" for
/// non-finite values.
std::string format_real(double value);

/// splitmix64: the only random source in the project, so seeded runs agree
/// across compilers and standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, bound).
  std::uint64_t bounded(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace latentkg
