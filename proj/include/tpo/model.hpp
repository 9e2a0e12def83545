#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tpo/tensor.hpp"

namespace tpo {

struct ModelConfig {
  int vocab_size = 24;
  int patch_count = 4;
  int patch_feature_dim = 12;
  int model_dim = 32;
  int max_seq_len = 24;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelConfig&) const = default;
};

// Tiny conditional language model over (patch features, token sequence):
// mean-pooled causal context plus one cross-attention read of the image
// patches. Exposes raw logits, log-probabilities and per-position patch
// attention for both the trainable policy and its frozen reference copy.
class ToyVlm {
 public:
  // Parameters drawn from N(0, 0.02^2) with config.init_seed; bias zero.
  static ToyVlm init(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  bool frozen() const { return frozen_; }

  // Deep parameter-wise copy with gradients disabled.
  ToyVlm clone_frozen() const;
  // Deep trainable copy (ablation runs restart from one warmup state).
  ToyVlm clone_trainable() const;

  std::vector<std::pair<std::string, Tensor>> named_params();
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::size_t param_count() const;
  std::uint64_t param_hash() const;

  const Tensor& tok_emb() const { return tok_emb_; }
  const Tensor& pos_emb() const { return pos_emb_; }
  const Tensor& w_q() const { return w_q_; }
  const Tensor& w_k() const { return w_k_; }
  const Tensor& w_v() const { return w_v_; }
  const Tensor& w_o() const { return w_o_; }
  const Tensor& bias() const { return bias_; }

 private:
  ToyVlm() = default;
  ModelConfig config_;
  Tensor tok_emb_;  // V x d
  Tensor pos_emb_;  // L x d
  Tensor w_q_;      // d x d
  Tensor w_k_;      // d x F
  Tensor w_v_;      // d x F
  Tensor w_o_;      // V x 2d
  Tensor bias_;     // V
  bool frozen_ = false;

  friend ToyVlm model_from_params(const ModelConfig&, const std::vector<std::vector<double>>&,
                                  bool frozen);
};

// Rebuild a model from flat row-major parameter arrays in named_params order.
ToyVlm model_from_params(const ModelConfig& config,
                         const std::vector<std::vector<double>>& flat_params, bool frozen);

struct ForwardOutput {
  Tensor logits;     // T x V, raw (pre-normalization)
  Tensor log_probs;  // T x V
  Tensor attention;  // T x P, rows sum to 1
};

// Teacher-forced forward over tokens = prompt followed by response; output
// rows cover exactly the positions that predict response tokens. Gradients
// flow unless the model is frozen or a NoGradGuard is active.
ForwardOutput forward(const ToyVlm& model, const std::vector<double>& patch_features,
                      std::span<const int> tokens, std::size_t prompt_len);

// Greedily appends argmax tokens (ties to the lowest id) until eos_id or
// max_response_len; returns the response tokens only (without eos).
std::vector<int> greedy_decode(const ToyVlm& model, const std::vector<double>& patch_features,
                               std::span<const int> prompt, std::size_t max_response_len,
                               int eos_id);

// Mean over rows [begin, end) of the attention mass on one patch.
double image_attention_mass(const ForwardOutput& output, std::size_t begin, std::size_t end,
                            std::size_t patch);

// Forward-pass accounting, used to verify the per-step cost contract.
struct ForwardCounters {
  std::uint64_t grad = 0;
  std::uint64_t no_grad = 0;
};
ForwardCounters& forward_counters();
void reset_forward_counters();

// Versioned JSON model snapshot; round-trips bit-exactly.
std::string model_to_json(const ToyVlm& model);
ToyVlm model_from_json(const std::string& text);
void save_model(const ToyVlm& model, const std::string& path);
ToyVlm load_model(const std::string& path);

}  // namespace tpo
