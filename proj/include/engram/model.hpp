#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "engram/tensor_store.hpp"

namespace engram {

enum class GeluKind { tanh_approx, exact_erf };

struct ModelConfig {
  int n_layers = 0;
  int n_heads = 0;
  int d_model = 0;
  int d_mlp = 0;
  int vocab_size = 0;
  int max_positions = 1024;
  double layer_norm_epsilon = 1e-5;
  bool tied_output_head = true;
  GeluKind gelu = GeluKind::tanh_approx;

  void validate() const;
};

ModelConfig load_model_config(const std::string& path);

struct ForwardOptions {
  std::vector<int> attention_layers;  // 1-based layer indices to capture
  bool want_hidden = false;           // keep post-final-norm hidden states
  int first_logit_row = 0;            // skip unembedding for earlier rows
};

struct ForwardOutput {
  int seq_len = 0;
  int vocab_size = 0;
  int first_logit_row = 0;
  // logits for rows [first_logit_row, seq_len), row-major [rows x vocab].
  std::vector<float> logits;
  // layer (1-based) -> [n_heads x T x T] row-major attention weights.
  std::map<int, std::vector<float>> attentions;
  // post-final-norm hidden states, [T x d_model]; empty unless requested.
  std::vector<float> hidden;

  const float* logits_row(int position) const;
};

// Immutable after load; forward() is const and safe to call concurrently.
class Model {
 public:
  static Model load(const std::string& weights_path, const ModelConfig& config);
  static Model from_store(const NamedTensorStore& store, const ModelConfig& config);

  ForwardOutput forward(const std::vector<int>& tokens, const ForwardOptions& opts = {}) const;

  const ModelConfig& config() const { return config_; }
  int64_t parameter_count() const;

  // Execution width for the row-parallel loops. Thread count never changes
  // results: each output element keeps its own serial reduction order.
  static void set_threads(int n);
  static int threads();

 private:
  Model() = default;

  struct Layer {
    std::vector<float> ln1_w, ln1_b;
    std::vector<float> qkv_w, qkv_b;    // [d, 3d] input-major, y = x W + b
    std::vector<float> proj_w, proj_b;  // [d, d]
    std::vector<float> ln2_w, ln2_b;
    std::vector<float> fc_w, fc_b;      // [d, m]
    std::vector<float> out_w, out_b;    // [m, d]
  };

  ModelConfig config_;
  std::vector<float> wte_;   // [V, d]
  std::vector<float> wpe_;   // [P, d]
  std::vector<Layer> layers_;
  std::vector<float> lnf_w_, lnf_b_;
  std::vector<float> head_w_;  // [V, d]; alias of wte_ when tied
};

// Softmax of one logits row with float64 accumulation; sums to 1 within 1e-6.
std::vector<double> next_token_distribution(const ForwardOutput& out, int position);

// log(sum(exp(row))) - row[token]; float64 path, always >= 0.
double token_nll_from_logits(const float* row, int vocab_size, int token_id);

}  // namespace engram
