#include "engram/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "engram/util.hpp"

namespace engram {

void EmbeddingTable::insert(std::string word, std::vector<float> vec) {
  if (static_cast<int>(vec.size()) != dim_) {
    fail(ErrorCategory::integrity, "embedding for \"" + word + "\" has wrong dimension");
  }
  for (float x : vec) {
    if (std::isnan(x)) fail(ErrorCategory::integrity, "embedding for \"" + word + "\" contains NaN");
  }
  auto [it, inserted] = vectors_.insert_or_assign(std::move(word), std::move(vec));
  (void)it;
  if (!inserted) ++duplicates_;  // last wins
}

std::string EmbeddingTable::normalize_key(std::string_view word, bool lowercase) {
  std::size_t lo = 0;
  std::size_t hi = word.size();
  auto is_strippable = [](unsigned char c) { return std::ispunct(c) != 0; };
  while (lo < hi && is_strippable(static_cast<unsigned char>(word[lo]))) ++lo;
  while (hi > lo && is_strippable(static_cast<unsigned char>(word[hi - 1]))) --hi;
  std::string key(word.substr(lo, hi - lo));
  if (lowercase) {
    for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return key;
}

const std::vector<float>* EmbeddingTable::lookup(std::string_view word) const {
  std::string key = normalize_key(word, lowercase_);
  if (key.empty()) return nullptr;
  auto it = vectors_.find(key);
  return it == vectors_.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path, int expected_dim, bool lowercase) {
  if (expected_dim <= 0) fail(ErrorCategory::domain, "expected_dim must be positive");
  EmbeddingTable table(expected_dim, lowercase);
  auto lines = read_text_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    if (line.empty()) continue;
    std::size_t sp = line.find(' ');
    if (sp == std::string::npos) {
      fail(ErrorCategory::parse,
           path + ":" + std::to_string(ln + 1) + ": expected word followed by floats");
    }
    std::vector<float> vec;
    vec.reserve(static_cast<std::size_t>(expected_dim));
    std::size_t pos = sp + 1;
    const char* end = line.data() + line.size();
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      float value;
      auto res = std::from_chars(line.data() + pos, end, value);
      if (res.ec != std::errc()) {
        fail(ErrorCategory::parse, path + ":" + std::to_string(ln + 1) + ": bad float in field " +
                                       std::to_string(vec.size() + 2));
      }
      vec.push_back(value);
      pos = static_cast<std::size_t>(res.ptr - line.data());
    }
    if (static_cast<int>(vec.size()) != expected_dim) {
      fail(ErrorCategory::parse, path + ":" + std::to_string(ln + 1) + ": expected " +
                                     std::to_string(expected_dim) + " floats, found " +
                                     std::to_string(vec.size()));
    }
    std::string word = line.substr(0, sp);
    if (lowercase) {
      for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    table.insert(std::move(word), std::move(vec));
  }
  return table;
}

std::optional<double> cosine(const std::vector<float>& u, const std::vector<float>& v) {
  if (u.size() != v.size()) fail(ErrorCategory::domain, "cosine: dimension mismatch");
  if (u.empty()) fail(ErrorCategory::domain, "cosine: empty vectors");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return std::nullopt;
  double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

std::optional<double> distinctiveness(
    std::size_t word_index, const std::vector<std::optional<std::vector<float>>>& story_vectors) {
  if (story_vectors.size() < 2) {
    fail(ErrorCategory::domain, "distinctiveness: need at least 2 story words");
  }
  if (word_index >= story_vectors.size()) {
    fail(ErrorCategory::domain, "distinctiveness: word index out of range");
  }
  const auto& target = story_vectors[word_index];
  if (!target) return std::nullopt;
  double acc = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < story_vectors.size(); ++i) {
    if (i == word_index || !story_vectors[i]) continue;
    auto c = cosine(*target, *story_vectors[i]);
    if (!c) continue;
    acc += *c;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return 1.0 - acc / n;
}

}  // namespace engram
