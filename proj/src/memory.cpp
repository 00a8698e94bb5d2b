#include "engram/memory.hpp"

#include <algorithm>
#include <cmath>

#include "engram/util.hpp"

namespace engram {

EncodingPolicy EncodingPolicy::threshold_at(double theta) {
  EncodingPolicy p;
  p.kind = PolicyKind::threshold;
  p.theta = theta;
  return p;
}

EncodingPolicy EncodingPolicy::top_fraction_of(double fraction) {
  EncodingPolicy p;
  p.kind = PolicyKind::top_fraction;
  p.fraction = fraction;
  return p;
}

EncodingPolicy EncodingPolicy::always() { return EncodingPolicy{PolicyKind::always, 0.0, 1.0}; }
EncodingPolicy EncodingPolicy::never() { return EncodingPolicy{PolicyKind::never, 0.0, 1.0}; }

void EncodingPolicy::validate() const {
  if (kind == PolicyKind::threshold && !(theta >= 0.0 && std::isfinite(theta))) {
    fail(ErrorCategory::domain, "threshold policy: theta must be finite and >= 0");
  }
  if (kind == PolicyKind::top_fraction && !(fraction > 0.0 && fraction <= 1.0)) {
    fail(ErrorCategory::domain, "top_fraction policy: fraction must be in (0, 1]");
  }
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "threshold") return PolicyKind::threshold;
  if (s == "top_fraction") return PolicyKind::top_fraction;
  if (s == "always") return PolicyKind::always;
  if (s == "never") return PolicyKind::never;
  fail(ErrorCategory::usage, "unknown policy kind: " + s +
                                 " (threshold|top_fraction|always|never)");
}

const char* to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::threshold: return "threshold";
    case PolicyKind::top_fraction: return "top_fraction";
    case PolicyKind::always: return "always";
    case PolicyKind::never: return "never";
  }
  return "?";
}

Metric parse_metric(const std::string& s) {
  if (s == "l2") return Metric::l2;
  if (s == "cosine") return Metric::cosine;
  fail(ErrorCategory::usage, "unknown metric: " + s + " (l2|cosine)");
}

const char* to_string(Metric m) { return m == Metric::l2 ? "l2" : "cosine"; }

void RunningSurprisal::observe(double surprisal) {
  auto it = std::upper_bound(sorted_.begin(), sorted_.end(), surprisal);
  sorted_.insert(it, surprisal);
}

double RunningSurprisal::quantile(double q) const {
  if (sorted_.empty()) fail(ErrorCategory::domain, "quantile of empty history");
  if (q <= 0.0) return sorted_.front();
  if (q >= 1.0) return sorted_.back();
  double idx = q * (static_cast<double>(sorted_.size()) - 1.0);
  std::size_t lo = static_cast<std::size_t>(idx);
  double frac = idx - static_cast<double>(lo);
  if (lo + 1 >= sorted_.size()) return sorted_.back();
  return sorted_[lo] * (1.0 - frac) + sorted_[lo + 1] * frac;
}

bool write_gate(const EncodingPolicy& policy, double surprisal, const RunningSurprisal& history) {
  if (!(std::isfinite(surprisal) && surprisal >= 0.0)) {
    fail(ErrorCategory::domain, "write_gate: surprisal must be finite and >= 0");
  }
  policy.validate();
  switch (policy.kind) {
    case PolicyKind::always: return true;
    case PolicyKind::never: return false;
    case PolicyKind::threshold: return surprisal >= policy.theta;
    case PolicyKind::top_fraction:
      if (history.count() == 0) return true;  // everything is in the top fraction of nothing
      return surprisal >= history.quantile(1.0 - policy.fraction);
  }
  return false;
}

bool MemoryStore::write(MemoryEntry entry) {
  if (mode_ == StoreMode::static_mode && sealed_) {
    fail(ErrorCategory::domain, "write to sealed static store");
  }
  entry.write_step = next_step_++;
  if (capacity_ > 0 && entries_.size() >= capacity_) {
    // evict lowest surprisal_at_write; tie -> oldest write_step
    std::size_t victim = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      const auto& v = entries_[victim];
      if (e.surprisal_at_write < v.surprisal_at_write ||
          (e.surprisal_at_write == v.surprisal_at_write && e.write_step < v.write_step)) {
        victim = i;
      }
    }
    entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  entries_.push_back(std::move(entry));
  return true;
}

void MemoryStore::seal() {
  if (mode_ != StoreMode::static_mode) {
    fail(ErrorCategory::domain, "seal() applies to static stores only");
  }
  sealed_ = true;
}

double key_distance(const std::vector<float>& a, const std::vector<float>& b, Metric metric) {
  if (a.size() != b.size()) fail(ErrorCategory::domain, "key dimension mismatch");
  if (metric == Metric::l2) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = static_cast<double>(a[i]) - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;  // treat zero-norm keys as uninformative
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<Retrieved> MemoryStore::retrieve(const std::vector<float>& query, std::size_t k,
                                             Metric metric) const {
  if (k < 1) fail(ErrorCategory::domain, "retrieve: k must be >= 1");
  std::vector<Retrieved> all;
  all.reserve(entries_.size());
  for (const auto& e : entries_) {
    all.push_back({&e, key_distance(query, e.key, metric)});
  }
  std::sort(all.begin(), all.end(), [](const Retrieved& x, const Retrieved& y) {
    if (x.distance != y.distance) return x.distance < y.distance;
    return x.entry->write_step < y.entry->write_step;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<double> interpolate(const std::vector<double>& p_lm,
                                const std::vector<Retrieved>& neighbors, double lambda, double tau,
                                bool* fell_back) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorCategory::domain, "lambda out of [0,1]");
  if (!(tau > 0.0)) fail(ErrorCategory::domain, "tau must be > 0");
  if (fell_back != nullptr) *fell_back = false;
  if (lambda == 0.0) return p_lm;
  if (neighbors.empty()) {
    if (fell_back != nullptr) *fell_back = true;
    return p_lm;
  }

  // softmax over -distance/tau, accumulated per value token
  double max_score = -1e300;
  for (const auto& nb : neighbors) max_score = std::max(max_score, -nb.distance / tau);
  std::vector<double> p(p_lm.size(), 0.0);
  double z = 0.0;
  for (const auto& nb : neighbors) {
    int v = nb.entry->value;
    if (v < 0 || static_cast<std::size_t>(v) >= p.size()) {
      fail(ErrorCategory::integrity, "memory entry value out of vocabulary range");
    }
    double w = std::exp(-nb.distance / tau - max_score);
    p[static_cast<std::size_t>(v)] += w;
    z += w;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = lambda * (p[i] / z) + (1.0 - lambda) * p_lm[i];
  }
  return p;
}

MemoryEvalReport eval_long_text(const Model& model, const std::vector<int>& tokens,
                                const MemoryEvalConfig& config) {
  const int T = static_cast<int>(tokens.size());
  const int w = config.window;
  if (T < 2) fail(ErrorCategory::domain, "eval_long_text: need at least 2 tokens");
  if (w < 2 || w > model.config().max_positions) {
    fail(ErrorCategory::domain, "eval_long_text: invalid window");
  }
  config.policy.validate();

  MemoryEvalReport rep;
  rep.n_tokens = T;

  MemoryStore store(config.capacity, StoreMode::dynamic);
  RunningSurprisal history;
  // entries whose key position is still visible inside the current window
  struct Pending {
    int key_position;
    MemoryEntry entry;
  };
  std::vector<Pending> pending;
  double sum_top1 = 0.0;

  // one full pass covers all positions scored with a complete prefix
  const int prefix = std::min(T, w);
  ForwardOutput head_pass;
  {
    std::vector<int> head(tokens.begin(), tokens.begin() + prefix);
    ForwardOptions opts;
    opts.want_hidden = true;
    head_pass = model.forward(head, opts);
  }

  for (int i = 1; i < T; ++i) {
    const bool in_prefix = i < prefix;
    const int lo = in_prefix ? 0 : i - w + 1;  // window start for this target
    ForwardOutput window_pass;
    const ForwardOutput* pass = &head_pass;
    int rel_prev;  // row of the position predicting token i
    if (in_prefix) {
      rel_prev = i - 1;
    } else {
      std::vector<int> win(tokens.begin() + lo, tokens.begin() + (i + 1));
      ForwardOptions opts;
      opts.want_hidden = true;
      opts.first_logit_row = w - 2;
      window_pass = model.forward(win, opts);
      pass = &window_pass;
      rel_prev = w - 2;
    }

    std::vector<double> p_lm = next_token_distribution(*pass, rel_prev);
    const double nll_base = -std::log(p_lm[static_cast<std::size_t>(tokens[static_cast<std::size_t>(i)])]);

    // flush pending entries whose key position fell out of the window
    std::size_t keep = 0;
    for (auto& p : pending) {
      if (p.key_position < lo) {
        store.write(std::move(p.entry));
        ++rep.writes;
      } else {
        pending[keep++] = std::move(p);
      }
    }
    pending.resize(keep);

    double nll_mem = nll_base;
    if (store.size() > 0) {
      const float* q = pass->hidden.data() + static_cast<std::size_t>(rel_prev) * model.config().d_model;
      std::vector<float> query(q, q + model.config().d_model);
      auto neighbors = store.retrieve(query, static_cast<std::size_t>(config.k), config.metric);
      ++rep.queries;
      if (!neighbors.empty()) {
        ++rep.queries_with_neighbors;
        sum_top1 += neighbors.front().distance;
      }
      bool fell_back = false;
      std::vector<double> p_mem =
          interpolate(p_lm, neighbors, config.lambda, config.tau, &fell_back);
      if (fell_back) ++rep.fallbacks;
      nll_mem = -std::log(p_mem[static_cast<std::size_t>(tokens[static_cast<std::size_t>(i)])]);
    } else if (config.lambda > 0.0) {
      ++rep.fallbacks;  // nothing to retrieve yet
    }

    rep.nll_baseline.push_back(nll_base);
    rep.nll_memory.push_back(nll_mem);

    // gate on realized model surprisal, then record it in the history
    bool gate = write_gate(config.policy, nll_base, history);
    history.observe(nll_base);
    ++rep.write_candidates;
    if (gate) {
      const float* key = pass->hidden.data() + static_cast<std::size_t>(rel_prev) * model.config().d_model;
      MemoryEntry e;
      e.key.assign(key, key + model.config().d_model);
      e.value = tokens[static_cast<std::size_t>(i)];
      e.surprisal_at_write = nll_base;
      pending.push_back({i - 1, std::move(e)});
    }
  }

  rep.n_scored = static_cast<int>(rep.nll_baseline.size());
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  rep.ppl_baseline = std::exp(mean(rep.nll_baseline));
  rep.ppl_memory = std::exp(mean(rep.nll_memory));
  rep.mean_top1_distance =
      rep.queries_with_neighbors > 0 ? sum_top1 / static_cast<double>(rep.queries_with_neighbors) : 0.0;
  return rep;
}

MemoryEvalReport eval_long_text(const Model& model, const Vocab& vocab, const std::string& text,
                                const MemoryEvalConfig& config) {
  TokenSequence seq = encode(vocab, text);
  return eval_long_text(model, seq.ids, config);
}

}  // namespace engram
