#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace engram {

// Static word-embedding table. Lookups lowercase the word and strip leading /
// trailing punctuation; a miss is a missing datum, never a zero vector.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, bool lowercase) : dim_(dim), lowercase_(lowercase) {}

  int dim() const { return dim_; }
  bool lowercase() const { return lowercase_; }
  std::size_t size() const { return vectors_.size(); }
  int duplicates_replaced() const { return duplicates_; }

  void insert(std::string word, std::vector<float> vec);
  const std::vector<float>* lookup(std::string_view word) const;
  static std::string normalize_key(std::string_view word, bool lowercase);

 private:
  int dim_;
  bool lowercase_;
  int duplicates_ = 0;
  std::unordered_map<std::string, std::vector<float>> vectors_;
};

// One entry per line: word then expected_dim floats, space-separated.
// Transparent to gzip.
EmbeddingTable load_embeddings(const std::string& path, int expected_dim, bool lowercase = true);

// dot(u,v) / (|u| |v|); empty when either vector has zero norm.
std::optional<double> cosine(const std::vector<float>& u, const std::vector<float>& v);

// 1 - mean cosine between word_index and every other story word (token-level:
// repeated words contribute once per occurrence). Entries without vectors are
// std::nullopt in story_vectors; a missing target word is a missing datum,
// missing partners are skipped from the average.
std::optional<double> distinctiveness(
    std::size_t word_index, const std::vector<std::optional<std::vector<float>>>& story_vectors);

}  // namespace engram
