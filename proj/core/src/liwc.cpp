#include "teamspace/liwc.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "teamspace/errors.hpp"

namespace teamspace {
namespace {

bool is_ascii_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_ascii_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

std::size_t line_at(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

// Line of the nth (0-based) quoted occurrence of `value`, or 1 if not found.
std::size_t line_of_quoted(std::string_view text, const std::string& value, int nth = 0) {
  const std::string needle = nlohmann::json(value).dump();
  std::size_t pos = 0;
  for (int i = 0;; ++i) {
    pos = text.find(needle, pos);
    if (pos == std::string_view::npos) return 1;
    if (i == nth) return line_at(text, pos);
    pos += needle.size();
  }
}

std::string check_pattern(const std::string& pattern) {
  if (pattern.empty() || pattern == "*") return "empty pattern";
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const auto c = static_cast<unsigned char>(pattern[i]);
    if (is_ascii_space(c)) return "pattern \"" + pattern + "\" contains whitespace";
    if (std::isupper(c)) return "pattern \"" + pattern + "\" is not lowercase";
    if (c == '*' && i + 1 != pattern.size()) {
      return "pattern \"" + pattern + "\" has '*' before its end";
    }
  }
  return {};
}

}  // namespace

LiwcDictionary::LiwcDictionary(std::map<std::string, std::vector<std::string>> categories)
    : categories_(std::move(categories)) {
  for (const auto& [name, patterns] : categories_) {
    if (name.empty()) throw ValidationError("empty category name");
    Compiled compiled;
    std::set<std::string> seen;
    for (const auto& p : patterns) {
      if (auto err = check_pattern(p); !err.empty()) {
        throw ValidationError("category " + name + ": " + err);
      }
      if (!seen.insert(p).second) {
        throw ValidationError("category " + name + ": duplicate pattern \"" + p + "\"");
      }
      if (p.back() == '*') {
        compiled.stems.push_back(p.substr(0, p.size() - 1));
      } else {
        compiled.exact.push_back(p);
      }
    }
    std::sort(compiled.exact.begin(), compiled.exact.end());
    compiled_.emplace(name, std::move(compiled));
  }
}

LiwcDictionary LiwcDictionary::from_json_text(std::string_view text) {
  using nlohmann::json;
  std::set<std::string> top_keys;
  std::string duplicate;
  json doc;
  try {
    doc = json::parse(text, [&](int depth, json::parse_event_t event, json& parsed) {
      if (event == json::parse_event_t::key && depth == 1 && duplicate.empty()) {
        auto key = parsed.get<std::string>();
        if (!top_keys.insert(key).second) duplicate = key;
      }
      return true;
    });
  } catch (const json::parse_error& e) {
    throw DictionaryError(line_at(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  if (!duplicate.empty()) {
    throw DictionaryError(line_of_quoted(text, duplicate, 1),
                          "duplicate category \"" + duplicate + "\"");
  }
  if (!doc.is_object()) throw DictionaryError(1, "dictionary must be a JSON object");

  std::map<std::string, std::vector<std::string>> categories;
  for (const auto& [name, patterns] : doc.items()) {
    if (name.empty()) throw DictionaryError(line_of_quoted(text, name), "empty category name");
    if (!patterns.is_array()) {
      throw DictionaryError(line_of_quoted(text, name),
                            "category \"" + name + "\" must map to an array of patterns");
    }
    std::vector<std::string> list;
    std::set<std::string> seen;
    for (const auto& p : patterns) {
      if (!p.is_string()) {
        throw DictionaryError(line_of_quoted(text, name),
                              "category \"" + name + "\" has a non-string pattern");
      }
      auto pattern = p.get<std::string>();
      if (auto err = check_pattern(pattern); !err.empty()) {
        throw DictionaryError(line_of_quoted(text, pattern), "category \"" + name + "\": " + err);
      }
      if (!seen.insert(pattern).second) {
        throw DictionaryError(line_of_quoted(text, pattern, 1),
                              "category \"" + name + "\": duplicate pattern \"" + pattern + "\"");
      }
      list.push_back(std::move(pattern));
    }
    categories.emplace(name, std::move(list));
  }
  return LiwcDictionary(std::move(categories));
}

LiwcDictionary LiwcDictionary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dictionary " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

bool LiwcDictionary::matches(const std::string& category, std::string_view token) const {
  auto it = compiled_.find(category);
  if (it == compiled_.end()) return false;
  const auto& c = it->second;
  if (std::binary_search(c.exact.begin(), c.exact.end(), token)) return true;
  return std::any_of(c.stems.begin(), c.stems.end(),
                     [&](const std::string& stem) { return token.starts_with(stem); });
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && is_ascii_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_ascii_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string token(text.substr(b, e - b));
      for (auto& ch : token) {
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      }
      tokens.push_back(std::move(token));
    }
    i = j;
  }
  return tokens;
}

LiwcProfile liwc_profile(std::span<const std::string> messages, const LiwcDictionary& dict) {
  LiwcProfile profile;
  std::map<std::string, double> sums;
  for (const auto& [name, _] : dict.categories()) sums[name] = 0.0;

  for (const auto& message : messages) {
    const auto tokens = tokenize(message);
    if (tokens.empty()) continue;
    ++profile.message_count;
    const double n = static_cast<double>(tokens.size());
    for (auto& [name, sum] : sums) {
      std::size_t hits = 0;
      for (const auto& t : tokens) {
        if (dict.matches(name, t)) ++hits;
      }
      sum += static_cast<double>(hits) / n;
    }
  }
  if (profile.message_count == 0) return profile;
  const double count = static_cast<double>(profile.message_count);
  for (const auto& [name, sum] : sums) profile.values[name] = sum / count;
  return profile;
}

std::optional<double> liwc_shift(const LiwcProfile& before, const LiwcProfile& after,
                                 const std::string& category) {
  auto b = before.values.find(category);
  auto a = after.values.find(category);
  if (b == before.values.end() || a == after.values.end()) {
    throw std::invalid_argument("unknown category " + category);
  }
  if (b->second == 0.0) {
    if (a->second == 0.0) return 0.0;
    return std::nullopt;
  }
  return 100.0 * (a->second - b->second) / b->second;
}

}  // namespace teamspace
