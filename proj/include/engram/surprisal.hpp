#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "engram/model.hpp"
#include "engram/tokenizer.hpp"

namespace engram {

struct TokenNLL {
  int position;
  int token_id;
  double nll;  // nats, >= 0
};

enum class AttnMode { mean, sum, max };

AttnMode parse_attn_mode(const std::string& s);
const char* to_string(AttnMode m);

struct WordRecord {
  int word_index;
  std::string word;
  int n_subtokens;
  std::optional<double> surprisal;             // nats; empty for the context-free first word
  std::map<int, std::optional<double>> attention;  // layer -> received-attention statistic
};

// Token NLLs under maximal context. Position i < window is scored inside one
// full-prefix pass; position i >= window gets a fresh pass over the window
// tokens [i-window+1, i] ending at i (stride-1 sliding window). Position 0 is
// never scored.
std::vector<TokenNLL> token_nlls(const Model& model, const std::vector<int>& tokens, int window);

// Word surprisal is the sum of the word's sub-token NLLs. Words whose entire
// span precedes the first scored position come back with an empty surprisal.
std::vector<WordRecord> word_surprisal(const std::vector<TokenNLL>& nlls,
                                       const std::vector<WordSpan>& spans);

// Received attention per key token in one captured layer: mean over heads and
// over strictly later query positions. The final position has no later query
// and yields an empty value.
std::vector<std::optional<double>> token_received_attention(const std::vector<float>& layer_attn,
                                                            int n_heads, int seq_len);

// Per-word attention statistic: sub-token values aggregated by `mode`
// (sub-tokens without a value are skipped; all-missing words stay missing).
std::vector<std::optional<double>> word_attention(const ForwardOutput& out,
                                                  const std::vector<WordSpan>& spans, int layer,
                                                  AttnMode mode);

// One streaming run over a story: NLLs, per-word surprisal, and per-word
// attention statistics for the requested layers, sharing forward passes.
// Attention is read from the pass that scored each token, so tokens at or
// beyond the window line (always window-final in their pass) have no later
// queries and no attention value.
struct StoryMetrics {
  std::vector<TokenNLL> nlls;
  std::vector<WordRecord> words;
  int full_passes = 0;
  int sliding_passes = 0;
};

StoryMetrics story_metrics(const Model& model, const TokenSequence& tokens,
                           const std::vector<WordSpan>& spans, int window,
                           const std::vector<int>& attention_layers, AttnMode mode);

double perplexity(const std::vector<TokenNLL>& nlls);

}  // namespace engram
