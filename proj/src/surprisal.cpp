#include "engram/surprisal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "engram/util.hpp"

namespace engram {

AttnMode parse_attn_mode(const std::string& s) {
  if (s == "mean") return AttnMode::mean;
  if (s == "sum") return AttnMode::sum;
  if (s == "max") return AttnMode::max;
  fail(ErrorCategory::usage, "unknown attention mode: " + s + " (mean|sum|max)");
}

const char* to_string(AttnMode m) {
  switch (m) {
    case AttnMode::mean: return "mean";
    case AttnMode::sum: return "sum";
    case AttnMode::max: return "max";
  }
  return "?";
}

std::vector<TokenNLL> token_nlls(const Model& model, const std::vector<int>& tokens, int window) {
  const int T = static_cast<int>(tokens.size());
  if (T < 2) fail(ErrorCategory::domain, "token_nlls: need at least 2 tokens");
  if (window < 2) fail(ErrorCategory::domain, "token_nlls: window must be >= 2");
  if (window > model.config().max_positions) {
    fail(ErrorCategory::domain, "token_nlls: window exceeds model max_positions");
  }

  std::vector<TokenNLL> out;
  out.reserve(static_cast<std::size_t>(T - 1));

  const int prefix = std::min(T, window);
  {
    std::vector<int> head(tokens.begin(), tokens.begin() + prefix);
    ForwardOutput fo = model.forward(head);
    for (int i = 1; i < prefix; ++i) {
      out.push_back({i, tokens[static_cast<std::size_t>(i)],
                     token_nll_from_logits(fo.logits_row(i - 1), fo.vocab_size,
                                           tokens[static_cast<std::size_t>(i)])});
    }
  }
  for (int i = window; i < T; ++i) {
    std::vector<int> win(tokens.begin() + (i - window + 1), tokens.begin() + (i + 1));
    ForwardOptions opts;
    opts.first_logit_row = window - 2;
    ForwardOutput fo = model.forward(win, opts);
    out.push_back({i, tokens[static_cast<std::size_t>(i)],
                   token_nll_from_logits(fo.logits_row(window - 2), fo.vocab_size,
                                         tokens[static_cast<std::size_t>(i)])});
  }
  return out;
}

std::vector<WordRecord> word_surprisal(const std::vector<TokenNLL>& nlls,
                                       const std::vector<WordSpan>& spans) {
  // nll lookup by position
  int max_pos = -1;
  for (const auto& n : nlls) max_pos = std::max(max_pos, n.position);
  std::vector<double> by_pos(static_cast<std::size_t>(max_pos + 1),
                             std::numeric_limits<double>::quiet_NaN());
  for (const auto& n : nlls) by_pos[static_cast<std::size_t>(n.position)] = n.nll;
  int first_scored = nlls.empty() ? -1 : nlls.front().position;
  for (const auto& n : nlls) first_scored = std::min(first_scored, n.position);

  std::vector<WordRecord> words;
  words.reserve(spans.size());
  for (const auto& span : spans) {
    WordRecord rec;
    rec.word_index = span.word_index;
    rec.word = span.word;
    rec.n_subtokens = span.token_hi - span.token_lo;
    double sum = 0.0;
    int have = 0;
    for (int t = span.token_lo; t < span.token_hi; ++t) {
      bool scored = t <= max_pos && !std::isnan(by_pos[static_cast<std::size_t>(t)]);
      if (scored) {
        sum += by_pos[static_cast<std::size_t>(t)];
        ++have;
      } else if (t >= first_scored && first_scored >= 0) {
        fail(ErrorCategory::integrity,
             "word " + std::to_string(span.word_index) + ": missing NLL at position " +
                 std::to_string(t) + " inside the scored range");
      }
    }
    if (have == rec.n_subtokens) {
      rec.surprisal = sum;
    } else if (have > 0) {
      // span starts before the first scored position (document-initial word
      // split across the boundary): no complete surprisal for it
      rec.surprisal = std::nullopt;
    }
    words.push_back(std::move(rec));
  }
  return words;
}

std::vector<std::optional<double>> token_received_attention(const std::vector<float>& layer_attn,
                                                            int n_heads, int seq_len) {
  if (layer_attn.size() !=
      static_cast<std::size_t>(n_heads) * static_cast<std::size_t>(seq_len) * seq_len) {
    fail(ErrorCategory::domain, "attention tensor size does not match n_heads * T * T");
  }
  std::vector<std::optional<double>> stat(static_cast<std::size_t>(seq_len));
  for (int k = 0; k < seq_len; ++k) {
    const int n_queries = seq_len - 1 - k;
    if (n_queries <= 0) continue;  // final position: no later query
    double acc = 0.0;
    for (int h = 0; h < n_heads; ++h) {
      const float* head = layer_attn.data() + static_cast<int64_t>(h) * seq_len * seq_len;
      for (int q = k + 1; q < seq_len; ++q) {
        acc += head[static_cast<int64_t>(q) * seq_len + k];
      }
    }
    stat[static_cast<std::size_t>(k)] = acc / (static_cast<double>(n_heads) * n_queries);
  }
  return stat;
}

namespace {

std::optional<double> aggregate_span(const std::vector<std::optional<double>>& token_stat,
                                     int lo, int hi, AttnMode mode) {
  double acc = mode == AttnMode::max ? -1e300 : 0.0;
  int have = 0;
  for (int t = lo; t < hi && t < static_cast<int>(token_stat.size()); ++t) {
    if (!token_stat[static_cast<std::size_t>(t)]) continue;
    double v = *token_stat[static_cast<std::size_t>(t)];
    switch (mode) {
      case AttnMode::mean:
      case AttnMode::sum: acc += v; break;
      case AttnMode::max: acc = std::max(acc, v); break;
    }
    ++have;
  }
  if (have == 0) return std::nullopt;
  if (mode == AttnMode::mean) return acc / have;
  return acc;
}

}  // namespace

std::vector<std::optional<double>> word_attention(const ForwardOutput& out,
                                                  const std::vector<WordSpan>& spans, int layer,
                                                  AttnMode mode) {
  auto it = out.attentions.find(layer);
  if (it == out.attentions.end()) {
    fail(ErrorCategory::domain,
         "attention for layer " + std::to_string(layer) + " was not captured");
  }
  const int T = out.seq_len;
  const int heads = static_cast<int>(it->second.size() / (static_cast<std::size_t>(T) * T));
  auto token_stat = token_received_attention(it->second, heads, T);
  std::vector<std::optional<double>> result;
  result.reserve(spans.size());
  for (const auto& span : spans) {
    result.push_back(aggregate_span(token_stat, span.token_lo, span.token_hi, mode));
  }
  return result;
}

StoryMetrics story_metrics(const Model& model, const TokenSequence& tokens,
                           const std::vector<WordSpan>& spans, int window,
                           const std::vector<int>& attention_layers, AttnMode mode) {
  const int T = static_cast<int>(tokens.size());
  if (T < 2) fail(ErrorCategory::domain, "story_metrics: need at least 2 tokens");
  if (window < 2 || window > model.config().max_positions) {
    fail(ErrorCategory::domain, "story_metrics: invalid window");
  }

  StoryMetrics m;
  // layer -> per-token received attention, absolute positions
  std::map<int, std::vector<std::optional<double>>> attn_by_layer;
  for (int l : attention_layers) {
    attn_by_layer[l].assign(static_cast<std::size_t>(T), std::nullopt);
  }

  const int prefix = std::min(T, window);
  {
    std::vector<int> head(tokens.ids.begin(), tokens.ids.begin() + prefix);
    ForwardOptions opts;
    opts.attention_layers = attention_layers;
    ForwardOutput fo = model.forward(head, opts);
    m.full_passes = 1;
    for (int i = 1; i < prefix; ++i) {
      m.nlls.push_back({i, tokens.ids[static_cast<std::size_t>(i)],
                        token_nll_from_logits(fo.logits_row(i - 1), fo.vocab_size,
                                              tokens.ids[static_cast<std::size_t>(i)])});
    }
    for (int l : attention_layers) {
      const int heads = model.config().n_heads;
      auto stat = token_received_attention(fo.attentions.at(l), heads, prefix);
      for (int t = 0; t < prefix; ++t) attn_by_layer[l][static_cast<std::size_t>(t)] = stat[t];
    }
  }
  // Sliding passes score one token each. The scored token sits at the end of
  // its window, so it receives no attention from later queries there; its
  // attention statistic stays empty by construction.
  for (int i = window; i < T; ++i) {
    std::vector<int> win(tokens.ids.begin() + (i - window + 1), tokens.ids.begin() + (i + 1));
    ForwardOptions opts;
    opts.first_logit_row = window - 2;
    ForwardOutput fo = model.forward(win, opts);
    ++m.sliding_passes;
    m.nlls.push_back({i, tokens.ids[static_cast<std::size_t>(i)],
                      token_nll_from_logits(fo.logits_row(window - 2), fo.vocab_size,
                                            tokens.ids[static_cast<std::size_t>(i)])});
  }

  m.words = word_surprisal(m.nlls, spans);
  for (std::size_t w = 0; w < m.words.size(); ++w) {
    for (int l : attention_layers) {
      m.words[w].attention[l] =
          aggregate_span(attn_by_layer[l], spans[w].token_lo, spans[w].token_hi, mode);
    }
  }
  return m;
}

double perplexity(const std::vector<TokenNLL>& nlls) {
  if (nlls.empty()) fail(ErrorCategory::domain, "perplexity of empty NLL list");
  double sum = 0.0;
  for (const auto& n : nlls) sum += n.nll;
  return std::exp(sum / static_cast<double>(nlls.size()));
}

}  // namespace engram
