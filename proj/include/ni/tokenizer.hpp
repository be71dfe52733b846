#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ni/ast.hpp"

namespace ni {

struct Token {
  std::string text;
  Span span;
};

// Lexical split of arbitrary text (never fails). Identifiers are broken on
// underscores and case transitions and lowercased; every piece keeps the span
// of the whole identifier. Strings and comments become their words, again
// sharing the literal's span.
std::vector<Token> tokenize(std::string_view source);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

class Vocabulary {
 public:
  static constexpr const char* kHeader = "NIVOCAB";

  Vocabulary() : Vocabulary(std::vector<std::string>{}, 64) {}
  Vocabulary(std::vector<std::string> tokens, int oov_buckets);

  // Keeps tokens seen at least min_count times, most frequent first (ties by
  // text), up to max_size entries.
  static Vocabulary build(const std::vector<std::string>& sources, int min_count, int max_size, int oov_buckets);

  int id(std::string_view token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  int oov_buckets() const { return oov_buckets_; }
  int rows() const { return size() + oov_buckets_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::uint64_t hash() const;

  std::string serialize() const;
  static Vocabulary deserialize(const std::string& text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int oov_buckets_;
};

}  // namespace ni
