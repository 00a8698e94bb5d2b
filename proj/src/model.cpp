#include "engram/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <thread>

#include "engram/util.hpp"
#include "json.hpp"

namespace engram {

void ModelConfig::validate() const {
  if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || d_mlp <= 0 || vocab_size <= 0) {
    fail(ErrorCategory::domain, "model config: all dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    fail(ErrorCategory::domain, "model config: d_model must be divisible by n_heads");
  }
  if (max_positions < 1) fail(ErrorCategory::domain, "model config: max_positions must be >= 1");
}

ModelConfig load_model_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::parse, "model config " + path + ": " + e.what());
  }
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.d_mlp = j.value("d_mlp", 4 * c.d_model);
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_positions = j.value("max_positions", 1024);
  c.layer_norm_epsilon = j.value("layer_norm_epsilon", 1e-5);
  c.tied_output_head = j.value("tied_output_head", true);
  std::string g = j.value("gelu", "tanh");
  if (g == "tanh") c.gelu = GeluKind::tanh_approx;
  else if (g == "exact") c.gelu = GeluKind::exact_erf;
  else fail(ErrorCategory::parse, "model config: gelu must be \"tanh\" or \"exact\"");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Threaded row-parallel helpers. Work is split by output row, so every output
// element is reduced in the same serial order no matter how many threads run.
// ---------------------------------------------------------------------------

namespace {

std::atomic<int> g_threads{0};  // 0 = use hardware_concurrency

int effective_threads() {
  int t = g_threads.load(std::memory_order_relaxed);
  if (t > 0) return t;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

template <typename Fn>
void parallel_for(int64_t n, const Fn& fn) {
  int nt = std::min<int64_t>(effective_threads(), n);
  if (nt <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  int64_t chunk = (n + nt - 1) / nt;
  for (int t = 0; t < nt; ++t) {
    int64_t lo = t * chunk;
    int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// C[rows x out] = A[rows x in] * W[in x out] + b, W input-major.
void matmul_bias(const float* a, const float* w, const float* b, float* c, int rows, int in,
                 int out) {
  parallel_for(rows, [&](int64_t r) {
    const float* ar = a + r * in;
    float* cr = c + r * out;
    if (b != nullptr) std::memcpy(cr, b, sizeof(float) * static_cast<std::size_t>(out));
    else std::fill(cr, cr + out, 0.0f);
    for (int k = 0; k < in; ++k) {
      const float av = ar[k];
      const float* wr = w + static_cast<int64_t>(k) * out;
      for (int j = 0; j < out; ++j) cr[j] += av * wr[j];
    }
  });
}

void layer_norm(const float* x, const float* w, const float* b, float* y, int rows, int d,
                double eps) {
  parallel_for(rows, [&](int64_t r) {
    const float* xr = x + r * d;
    float* yr = y + r * d;
    double mean = 0.0;
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= d;
    double var = 0.0;
    for (int i = 0; i < d; ++i) {
      double dv = xr[i] - mean;
      var += dv * dv;
    }
    var /= d;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < d; ++i) {
      yr[i] = static_cast<float>((xr[i] - mean) * inv) * w[i] + b[i];
    }
  });
}

inline float gelu_tanh(float x) {
  const float c = 0.7978845608028654f;  // sqrt(2/pi)
  float inner = c * (x + 0.044715f * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(inner));
}

inline float gelu_erf(float x) {
  return 0.5f * x * (1.0f + std::erf(x * 0.7071067811865476f));
}

std::vector<float> fetch(const NamedTensorStore& store, const std::string& name,
                         std::vector<int64_t> want_shape) {
  // Accept an optional "transformer." prefix so third-party exports load as-is.
  const TensorInfo* info = nullptr;
  if (store.has(name)) info = &store.get(name);
  else if (store.has("transformer." + name)) info = &store.get("transformer." + name);
  else fail(ErrorCategory::integrity, "missing tensor: " + name);
  if (info->shape != want_shape) {
    auto fmt = [](const std::vector<int64_t>& s) {
      std::string r = "[";
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) r += ", ";
        r += std::to_string(s[i]);
      }
      return r + "]";
    };
    fail(ErrorCategory::integrity,
         "tensor " + name + ": expected shape " + fmt(want_shape) + ", found " + fmt(info->shape));
  }
  if (info->data.empty() && info->element_count() != 0) {
    fail(ErrorCategory::integrity, "tensor " + name + ": dtype is not f32");
  }
  return info->data;
}

}  // namespace

void Model::set_threads(int n) { g_threads.store(n, std::memory_order_relaxed); }
int Model::threads() { return effective_threads(); }

Model Model::load(const std::string& weights_path, const ModelConfig& config) {
  return from_store(load_tensors(weights_path), config);
}

Model Model::from_store(const NamedTensorStore& store, const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  const int64_t d = config.d_model;
  const int64_t mlp = config.d_mlp;
  const int64_t v = config.vocab_size;
  const int64_t p = config.max_positions;

  m.wte_ = fetch(store, "wte.weight", {v, d});
  m.wpe_ = fetch(store, "wpe.weight", {p, d});
  m.layers_.resize(static_cast<std::size_t>(config.n_layers));
  for (int l = 0; l < config.n_layers; ++l) {
    std::string pre = "h." + std::to_string(l) + ".";
    Layer& L = m.layers_[static_cast<std::size_t>(l)];
    L.ln1_w = fetch(store, pre + "ln_1.weight", {d});
    L.ln1_b = fetch(store, pre + "ln_1.bias", {d});
    L.qkv_w = fetch(store, pre + "attn.c_attn.weight", {d, 3 * d});
    L.qkv_b = fetch(store, pre + "attn.c_attn.bias", {3 * d});
    L.proj_w = fetch(store, pre + "attn.c_proj.weight", {d, d});
    L.proj_b = fetch(store, pre + "attn.c_proj.bias", {d});
    L.ln2_w = fetch(store, pre + "ln_2.weight", {d});
    L.ln2_b = fetch(store, pre + "ln_2.bias", {d});
    L.fc_w = fetch(store, pre + "mlp.c_fc.weight", {d, mlp});
    L.fc_b = fetch(store, pre + "mlp.c_fc.bias", {mlp});
    L.out_w = fetch(store, pre + "mlp.c_proj.weight", {mlp, d});
    L.out_b = fetch(store, pre + "mlp.c_proj.bias", {d});
  }
  m.lnf_w_ = fetch(store, "ln_f.weight", {d});
  m.lnf_b_ = fetch(store, "ln_f.bias", {d});
  if (config.tied_output_head) {
    m.head_w_ = m.wte_;
  } else {
    m.head_w_ = fetch(store, "lm_head.weight", {v, d});
  }
  return m;
}

int64_t Model::parameter_count() const {
  int64_t n = static_cast<int64_t>(wte_.size() + wpe_.size() + lnf_w_.size() + lnf_b_.size());
  for (const auto& L : layers_) {
    n += static_cast<int64_t>(L.ln1_w.size() + L.ln1_b.size() + L.qkv_w.size() + L.qkv_b.size() +
                              L.proj_w.size() + L.proj_b.size() + L.ln2_w.size() + L.ln2_b.size() +
                              L.fc_w.size() + L.fc_b.size() + L.out_w.size() + L.out_b.size());
  }
  if (!config_.tied_output_head) n += static_cast<int64_t>(head_w_.size());
  return n;
}

const float* ForwardOutput::logits_row(int position) const {
  if (position < first_logit_row || position >= seq_len) {
    fail(ErrorCategory::domain, "logits row " + std::to_string(position) + " not computed");
  }
  return logits.data() + static_cast<int64_t>(position - first_logit_row) * vocab_size;
}

ForwardOutput Model::forward(const std::vector<int>& tokens, const ForwardOptions& opts) const {
  const int T = static_cast<int>(tokens.size());
  const int d = config_.d_model;
  const int H = config_.n_heads;
  const int dh = d / H;
  const int V = config_.vocab_size;

  if (T < 1) fail(ErrorCategory::domain, "forward: empty token sequence");
  if (T > config_.max_positions) {
    fail(ErrorCategory::domain, "forward: sequence length " + std::to_string(T) +
                                    " exceeds max_positions " +
                                    std::to_string(config_.max_positions));
  }
  for (int t : tokens) {
    if (t < 0 || t >= V) fail(ErrorCategory::domain, "forward: token id out of range");
  }
  for (int l : opts.attention_layers) {
    if (l < 1 || l > config_.n_layers) {
      fail(ErrorCategory::domain, "attention layer index " + std::to_string(l) +
                                      " out of range [1, " + std::to_string(config_.n_layers) + "]");
    }
  }

  ForwardOutput out;
  out.seq_len = T;
  out.vocab_size = V;
  out.first_logit_row = std::clamp(opts.first_logit_row, 0, T);

  const std::size_t td = static_cast<std::size_t>(T) * d;
  std::vector<float> x(td);  // residual stream
  for (int t = 0; t < T; ++t) {
    const float* emb = wte_.data() + static_cast<int64_t>(tokens[t]) * d;
    const float* pos = wpe_.data() + static_cast<int64_t>(t) * d;
    float* xt = x.data() + static_cast<int64_t>(t) * d;
    for (int i = 0; i < d; ++i) xt[i] = emb[i] + pos[i];
  }

  std::vector<float> norm(td);
  std::vector<float> qkv(static_cast<std::size_t>(T) * 3 * d);
  std::vector<float> attn_ctx(td);
  std::vector<float> mlp_hidden(static_cast<std::size_t>(T) * config_.d_mlp);
  std::vector<float> mlp_out(td);
  std::vector<float> scores;  // per-layer [H x T x T] softmaxed weights

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (int l = 0; l < config_.n_layers; ++l) {
    const Layer& L = layers_[static_cast<std::size_t>(l)];

    layer_norm(x.data(), L.ln1_w.data(), L.ln1_b.data(), norm.data(), T, d,
               config_.layer_norm_epsilon);
    matmul_bias(norm.data(), L.qkv_w.data(), L.qkv_b.data(), qkv.data(), T, d, 3 * d);

    scores.assign(static_cast<std::size_t>(H) * T * T, 0.0f);
    // causal attention, one (head, query) pair per task
    parallel_for(static_cast<int64_t>(H) * T, [&](int64_t hq) {
      const int h = static_cast<int>(hq / T);
      const int q = static_cast<int>(hq % T);
      const float* qv = qkv.data() + static_cast<int64_t>(q) * 3 * d + h * dh;
      float* row = scores.data() + (static_cast<int64_t>(h) * T + q) * T;
      double maxv = -1e300;
      for (int k = 0; k <= q; ++k) {
        const float* kv = qkv.data() + static_cast<int64_t>(k) * 3 * d + d + h * dh;
        float dot = 0.0f;
        for (int i = 0; i < dh; ++i) dot += qv[i] * kv[i];
        double s = dot * scale;
        row[k] = static_cast<float>(s);
        maxv = std::max(maxv, s);
      }
      double denom = 0.0;
      for (int k = 0; k <= q; ++k) denom += std::exp(static_cast<double>(row[k]) - maxv);
      for (int k = 0; k <= q; ++k) {
        row[k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - maxv) / denom);
      }
      // weighted sum of values
      float* ctx = attn_ctx.data() + static_cast<int64_t>(q) * d + h * dh;
      std::fill(ctx, ctx + dh, 0.0f);
      for (int k = 0; k <= q; ++k) {
        const float w = row[k];
        const float* vv = qkv.data() + static_cast<int64_t>(k) * 3 * d + 2 * d + h * dh;
        for (int i = 0; i < dh; ++i) ctx[i] += w * vv[i];
      }
    });

    if (std::find(opts.attention_layers.begin(), opts.attention_layers.end(), l + 1) !=
        opts.attention_layers.end()) {
      out.attentions[l + 1] = scores;
    }

    matmul_bias(attn_ctx.data(), L.proj_w.data(), L.proj_b.data(), mlp_out.data(), T, d, d);
    for (std::size_t i = 0; i < td; ++i) x[i] += mlp_out[i];

    layer_norm(x.data(), L.ln2_w.data(), L.ln2_b.data(), norm.data(), T, d,
               config_.layer_norm_epsilon);
    matmul_bias(norm.data(), L.fc_w.data(), L.fc_b.data(), mlp_hidden.data(), T, d, config_.d_mlp);
    const bool tanh_gelu = config_.gelu == GeluKind::tanh_approx;
    parallel_for(T, [&](int64_t t) {
      float* row = mlp_hidden.data() + t * config_.d_mlp;
      for (int i = 0; i < config_.d_mlp; ++i) {
        row[i] = tanh_gelu ? gelu_tanh(row[i]) : gelu_erf(row[i]);
      }
    });
    matmul_bias(mlp_hidden.data(), L.out_w.data(), L.out_b.data(), mlp_out.data(), T, config_.d_mlp,
                d);
    for (std::size_t i = 0; i < td; ++i) x[i] += mlp_out[i];
  }

  layer_norm(x.data(), lnf_w_.data(), lnf_b_.data(), norm.data(), T, d, config_.layer_norm_epsilon);
  if (opts.want_hidden) out.hidden = norm;

  const int rows = T - out.first_logit_row;
  out.logits.resize(static_cast<std::size_t>(rows) * V);
  // unembedding: dot products against vocabulary rows
  parallel_for(static_cast<int64_t>(rows) * V, [&](int64_t idx) {
    const int r = static_cast<int>(idx / V);
    const int v = static_cast<int>(idx % V);
    const float* hrow = norm.data() + static_cast<int64_t>(r + out.first_logit_row) * d;
    const float* wrow = head_w_.data() + static_cast<int64_t>(v) * d;
    float dot = 0.0f;
    for (int i = 0; i < d; ++i) dot += hrow[i] * wrow[i];
    out.logits[idx] = dot;
  });

  return out;
}

std::vector<double> next_token_distribution(const ForwardOutput& out, int position) {
  const float* row = out.logits_row(position);
  const int v = out.vocab_size;
  double maxv = -1e300;
  for (int i = 0; i < v; ++i) maxv = std::max(maxv, static_cast<double>(row[i]));
  std::vector<double> p(static_cast<std::size_t>(v));
  double denom = 0.0;
  for (int i = 0; i < v; ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(row[i]) - maxv);
    denom += p[static_cast<std::size_t>(i)];
  }
  for (double& x : p) x /= denom;
  return p;
}

double token_nll_from_logits(const float* row, int vocab_size, int token_id) {
  if (token_id < 0 || token_id >= vocab_size) {
    fail(ErrorCategory::domain, "token id out of range in NLL computation");
  }
  double maxv = -1e300;
  for (int i = 0; i < vocab_size; ++i) maxv = std::max(maxv, static_cast<double>(row[i]));
  double denom = 0.0;
  for (int i = 0; i < vocab_size; ++i) denom += std::exp(static_cast<double>(row[i]) - maxv);
  double lse = maxv + std::log(denom);
  return lse - static_cast<double>(row[token_id]);
}

}  // namespace engram
