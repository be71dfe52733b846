#include "ni/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ni/errors.hpp"

namespace ni {

namespace {

constexpr int kMaxWordsPerLiteral = 16;

constexpr std::array<const char*, 26> kMultiCharOps = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=", ">=",
    "==",  "!=",  "<>",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "@=", "!",
};

bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "celsiusToFahrenheit_v2" -> celsius, to, fahrenheit, v2
std::vector<std::string> split_identifier(std::string_view id) {
  std::vector<std::string> parts;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) parts.push_back(lower(current));
    current.clear();
  };
  for (std::size_t i = 0; i < id.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(id[i]);
    if (c == '_') {
      flush();
      continue;
    }
    if (std::isupper(c) && !current.empty()) {
      const unsigned char prev = static_cast<unsigned char>(current.back());
      const bool next_lower = i + 1 < id.size() && std::islower(static_cast<unsigned char>(id[i + 1]));
      if (std::islower(prev) || std::isdigit(prev) || (std::isupper(prev) && next_lower)) flush();
    }
    current.push_back(static_cast<char>(c));
  }
  flush();
  return parts;
}

void push_words(std::string_view text, Span span, const char* fallback, std::vector<Token>& out) {
  int words = 0;
  std::size_t i = 0;
  while (i < text.size() && words < kMaxWordsPerLiteral) {
    if (!std::isalnum(static_cast<unsigned char>(text[i])) && static_cast<unsigned char>(text[i]) < 0x80) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && (is_ident_char(static_cast<unsigned char>(text[j])))) ++j;
    for (std::string& part : split_identifier(text.substr(i, j - i))) {
      if (words >= kMaxWordsPerLiteral) break;
      out.push_back(Token{std::move(part), span});
      ++words;
    }
    i = j;
  }
  if (words == 0) out.push_back(Token{fallback, span});
}

std::size_t scan_string(std::string_view src, std::size_t pos) {
  while (src[pos] != '\'' && src[pos] != '"') ++pos;
  const char q = src[pos];
  const bool triple = src.compare(pos, 3, std::string(3, q)) == 0;
  pos += triple ? 3 : 1;
  while (pos < src.size()) {
    const char c = src[pos];
    if (c == '\\') {
      pos += 2;
      continue;
    }
    if (triple) {
      if (src.compare(pos, 3, std::string(3, q)) == 0) return pos + 3;
    } else {
      if (c == q) return pos + 1;
      if (c == '\n') return pos;
    }
    ++pos;
  }
  return src.size();
}

bool at_string(std::string_view src, std::size_t pos) {
  std::size_t p = pos;
  while (p < src.size() && p - pos < 2 && std::strchr("rRbBuUfF", src[p]) != nullptr && src[p] != '\0') ++p;
  return p < src.size() && (src[p] == '\'' || src[p] == '"');
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  std::size_t pos = 0;
  while (pos < src.size()) {
    const unsigned char c = static_cast<unsigned char>(src[pos]);
    if (std::isspace(c) || c == '\\') {
      ++pos;
      continue;
    }
    if (c == '#') {
      std::size_t e = pos;
      while (e < src.size() && src[e] != '\n') ++e;
      push_words(src.substr(pos + 1, e - pos - 1), Span{pos, e}, "#", out);
      pos = e;
      continue;
    }
    if (at_string(src, pos)) {
      const std::size_t e = std::min(scan_string(src, pos), src.size());
      std::size_t body = pos;
      while (src[body] != '\'' && src[body] != '"') ++body;
      push_words(src.substr(body, e - body), Span{pos, e}, "<str>", out);
      pos = std::max(e, pos + 1);
      continue;
    }
    if (std::isdigit(c) || (c == '.' && pos + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[pos + 1])))) {
      std::size_t e = pos;
      while (e < src.size()) {
        const unsigned char d = static_cast<unsigned char>(src[e]);
        if (std::isalnum(d) || d == '_' || d == '.') {
          ++e;
        } else if ((d == '+' || d == '-') && (src[e - 1] == 'e' || src[e - 1] == 'E') &&
                   !(src.size() > pos + 1 && (src[pos + 1] == 'x' || src[pos + 1] == 'X'))) {
          ++e;
        } else {
          break;
        }
      }
      out.push_back(Token{lower(src.substr(pos, e - pos)), Span{pos, e}});
      pos = e;
      continue;
    }
    if (is_ident_char(c)) {
      std::size_t e = pos;
      while (e < src.size() && is_ident_char(static_cast<unsigned char>(src[e]))) ++e;
      auto parts = split_identifier(src.substr(pos, e - pos));
      if (parts.empty()) parts.push_back("_");
      for (auto& p : parts) out.push_back(Token{std::move(p), Span{pos, e}});
      pos = e;
      continue;
    }
    std::size_t n = 1;
    for (const char* op : kMultiCharOps) {
      const std::size_t len = std::strlen(op);
      if (src.compare(pos, len, op) == 0) {
        n = len;
        break;
      }
    }
    out.push_back(Token{std::string(src.substr(pos, n)), Span{pos, pos + n}});
    pos += n;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, int oov_buckets)
    : tokens_(std::move(tokens)), oov_buckets_(oov_buckets) {
  if (oov_buckets_ < 1) throw ConfigError("vocabulary needs at least one OOV bucket");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ConfigError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& sources, int min_count, int max_size, int oov_buckets) {
  std::map<std::string, int> counts;
  for (const auto& s : sources) {
    for (const auto& t : tokenize(s)) counts[t.text] += 1;
  }
  std::vector<std::pair<std::string, int>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  for (const auto& [tok, n] : ranked) {
    if (n < min_count || static_cast<int>(tokens.size()) >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens), oov_buckets);
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  return size() + static_cast<int>(fnv1a64(token) % static_cast<std::uint64_t>(oov_buckets_));
}

std::uint64_t Vocabulary::hash() const { return fnv1a64(serialize()); }

std::string Vocabulary::serialize() const {
  std::ostringstream out;
  out << kHeader << " v1 " << size() << " " << oov_buckets_ << "\n";
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << i << "\t" << tokens_[i] << "\n";
  return out.str();
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
  std::istringstream in(text);
  std::string magic, version;
  int size = 0, buckets = 0;
  if (!(in >> magic >> version >> size >> buckets) || magic != kHeader || version != "v1") {
    throw ConfigError("not a NIVOCAB v1 vocabulary");
  }
  std::string line;
  std::getline(in, line);
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("malformed vocabulary line: " + line);
    if (std::stoi(line.substr(0, tab)) != static_cast<int>(tokens.size())) {
      throw ConfigError("vocabulary ids must be consecutive");
    }
    tokens.push_back(line.substr(tab + 1));
  }
  if (static_cast<int>(tokens.size()) != size) throw ConfigError("vocabulary size does not match header");
  return Vocabulary(std::move(tokens), buckets);
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << serialize();
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace ni
