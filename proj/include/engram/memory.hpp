#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "engram/model.hpp"
#include "engram/tokenizer.hpp"

namespace engram {

struct MemoryEntry {
  std::vector<float> key;  // final-layer (post-norm) hidden state
  int value = 0;           // next-token id
  double surprisal_at_write = 0.0;
  int64_t write_step = 0;
};

enum class PolicyKind { threshold, top_fraction, always, never };

// Encoding policy: decides whether a (context, next-token) pair enters the
// external memory. The gate consumes realized surprisal, after the token's
// NLL is known.
struct EncodingPolicy {
  PolicyKind kind = PolicyKind::always;
  double theta = 0.0;     // threshold in nats
  double fraction = 1.0;  // top_fraction parameter, in (0, 1]

  static EncodingPolicy threshold_at(double theta);
  static EncodingPolicy top_fraction_of(double fraction);
  static EncodingPolicy always();
  static EncodingPolicy never();

  void validate() const;
};

PolicyKind parse_policy_kind(const std::string& s);
const char* to_string(PolicyKind k);

// History of surprisals seen by the gate. The caller observes each surprisal
// after gating it, so the top_fraction quantile is over strictly earlier
// values; with no history the gate accepts.
class RunningSurprisal {
 public:
  void observe(double surprisal);
  std::size_t count() const { return sorted_.size(); }
  // linear-interpolation percentile of the values seen so far
  double quantile(double q) const;

 private:
  std::vector<double> sorted_;
};

bool write_gate(const EncodingPolicy& policy, double surprisal, const RunningSurprisal& history);

enum class StoreMode { static_mode, dynamic };
enum class Metric { l2, cosine };

Metric parse_metric(const std::string& s);
const char* to_string(Metric m);

struct Retrieved {
  const MemoryEntry* entry;
  double distance;
};

// Append-ordered store. Bounded stores evict the entry with the lowest
// surprisal_at_write (ties: oldest write_step) before accepting a new one.
// A static store rejects writes once sealed.
class MemoryStore {
 public:
  // capacity 0 = unbounded
  explicit MemoryStore(std::size_t capacity = 0, StoreMode mode = StoreMode::dynamic)
      : capacity_(capacity), mode_(mode) {}

  bool write(MemoryEntry entry);
  void seal();

  bool sealed() const { return sealed_; }
  StoreMode mode() const { return mode_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  // Exact k-nearest by brute-force scan, ascending distance, ties broken by
  // write_step. An empty store returns an empty list.
  std::vector<Retrieved> retrieve(const std::vector<float>& query, std::size_t k,
                                  Metric metric) const;

 private:
  std::vector<MemoryEntry> entries_;
  std::size_t capacity_;
  StoreMode mode_;
  bool sealed_ = false;
  int64_t next_step_ = 0;
};

double key_distance(const std::vector<float>& a, const std::vector<float>& b, Metric metric);

// p_knn(w) proportional to sum over neighbors with value w of exp(-d/tau);
// result = lambda * p_knn + (1 - lambda) * p_lm. lambda = 0 returns p_lm
// bit-for-bit. Empty neighbors with lambda > 0 falls back to p_lm and sets
// *fell_back.
std::vector<double> interpolate(const std::vector<double>& p_lm,
                                const std::vector<Retrieved>& neighbors, double lambda, double tau,
                                bool* fell_back = nullptr);

struct MemoryEvalConfig {
  int window = 1024;
  EncodingPolicy policy;
  double lambda = 0.25;
  double tau = 1.0;
  int k = 8;
  std::size_t capacity = 0;  // unbounded
  Metric metric = Metric::l2;
};

struct MemoryEvalReport {
  int n_tokens = 0;
  int n_scored = 0;
  double ppl_baseline = 0.0;
  double ppl_memory = 0.0;
  int64_t writes = 0;
  int64_t write_candidates = 0;
  int64_t queries = 0;
  int64_t queries_with_neighbors = 0;
  int64_t fallbacks = 0;
  double mean_top1_distance = 0.0;  // over queries with neighbors
  std::vector<double> nll_baseline;  // per scored position, positions 1..T-1
  std::vector<double> nll_memory;
};

// Streams a token sequence through sliding-window passes; positions past the
// window query the memory of entries whose key position already left the
// window, interpolate, and accumulate NLL under both the memory-augmented and
// plain distributions in one pass.
MemoryEvalReport eval_long_text(const Model& model, const std::vector<int>& tokens,
                                const MemoryEvalConfig& config);

MemoryEvalReport eval_long_text(const Model& model, const Vocab& vocab, const std::string& text,
                                const MemoryEvalConfig& config);

}  // namespace engram
