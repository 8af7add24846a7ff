#pragma once

// Dictionary-based word-category rates for chat transcripts.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace teamspace {

/// A pattern is either an exact lowercase token or a lowercase stem followed by '*'.
class LiwcDictionary {
 public:
  LiwcDictionary() = default;

  /// Throws ValidationError on an empty category name, a duplicate or
  /// malformed pattern (uppercase, whitespace, empty, '*' not at the end).
  explicit LiwcDictionary(std::map<std::string, std::vector<std::string>> categories);

  /// Parses `{"category": ["pattern", ...], ...}`. Errors carry the 1-based
  /// line number of the offending text.
  static LiwcDictionary from_json_text(std::string_view text);
  static LiwcDictionary load(const std::string& path);

  const std::map<std::string, std::vector<std::string>>& categories() const noexcept {
    return categories_;
  }

  bool matches(const std::string& category, std::string_view token) const;

 private:
  struct Compiled {
    std::vector<std::string> exact;
    std::vector<std::string> stems;
  };

  std::map<std::string, std::vector<std::string>> categories_;
  std::map<std::string, Compiled> compiled_;
};

/// Thrown by LiwcDictionary parsing with the line that caused it.
class DictionaryError : public std::runtime_error {
 public:
  DictionaryError(std::size_t line, const std::string& message)
      : std::runtime_error("dictionary line " + std::to_string(line) + ": " + message),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct LiwcProfile {
  std::map<std::string, double> values;
  std::size_t message_count = 0;
};

/// Lowercases, splits on whitespace and trims punctuation from both ends of
/// each token. Internal apostrophes (and other internal punctuation) survive.
std::vector<std::string> tokenize(std::string_view text);

/// Per-message matching-token fraction per category, averaged over messages
/// that have at least one token.
LiwcProfile liwc_profile(std::span<const std::string> messages, const LiwcDictionary& dict);

/// Percent change of one category from `before` to `after`. 0 -> 0 is 0%;
/// 0 -> positive is absent ("new"). Throws std::invalid_argument when the
/// category is missing from either profile.
std::optional<double> liwc_shift(const LiwcProfile& before, const LiwcProfile& after,
                                 const std::string& category);

}  // namespace teamspace
