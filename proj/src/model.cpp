#include "tpo/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tpo/rng.hpp"

namespace tpo {

namespace {

Tensor gaussian_tensor(std::vector<std::size_t> shape, double std_dev, Rng& rng,
                       bool requires_grad) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = std_dev * rng.gaussian();
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

void check_config(const ModelConfig& c) {
  if (c.vocab_size <= 0 || c.patch_count <= 0 || c.patch_feature_dim <= 0 ||
      c.model_dim <= 0 || c.max_seq_len <= 0) {
    throw std::invalid_argument("model config dimensions must be positive");
  }
}

}  // namespace

ToyVlm ToyVlm::init(const ModelConfig& config) {
  check_config(config);
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto P [[maybe_unused]] = static_cast<std::size_t>(config.patch_count);
  const auto F = static_cast<std::size_t>(config.patch_feature_dim);
  const auto d = static_cast<std::size_t>(config.model_dim);
  const auto L = static_cast<std::size_t>(config.max_seq_len);
  Rng rng(config.init_seed);
  ToyVlm m;
  m.config_ = config;
  m.tok_emb_ = gaussian_tensor({V, d}, 0.02, rng, true);
  m.pos_emb_ = gaussian_tensor({L, d}, 0.02, rng, true);
  m.w_q_ = gaussian_tensor({d, d}, 0.02, rng, true);
  m.w_k_ = gaussian_tensor({d, F}, 0.02, rng, true);
  m.w_v_ = gaussian_tensor({d, F}, 0.02, rng, true);
  m.w_o_ = gaussian_tensor({V, 2 * d}, 0.02, rng, true);
  m.bias_ = Tensor::zeros({V}, true);
  return m;
}

namespace {

ToyVlm copy_model(const ToyVlm& src, bool frozen) {
  std::vector<std::vector<double>> flat;
  for (const auto& [name, t] : src.named_params()) flat.push_back(t.values());
  return model_from_params(src.config(), flat, frozen);
}

}  // namespace

ToyVlm ToyVlm::clone_frozen() const { return copy_model(*this, true); }
ToyVlm ToyVlm::clone_trainable() const { return copy_model(*this, false); }

ToyVlm model_from_params(const ModelConfig& config,
                         const std::vector<std::vector<double>>& flat_params, bool frozen) {
  check_config(config);
  if (flat_params.size() != 7) {
    throw std::invalid_argument("expected 7 parameter arrays, got " +
                                std::to_string(flat_params.size()));
  }
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto F = static_cast<std::size_t>(config.patch_feature_dim);
  const auto d = static_cast<std::size_t>(config.model_dim);
  const auto L = static_cast<std::size_t>(config.max_seq_len);
  const bool rg = !frozen;
  ToyVlm m;
  m.config_ = config;
  m.frozen_ = frozen;
  m.tok_emb_ = Tensor::from({V, d}, flat_params[0], rg);
  m.pos_emb_ = Tensor::from({L, d}, flat_params[1], rg);
  m.w_q_ = Tensor::from({d, d}, flat_params[2], rg);
  m.w_k_ = Tensor::from({d, F}, flat_params[3], rg);
  m.w_v_ = Tensor::from({d, F}, flat_params[4], rg);
  m.w_o_ = Tensor::from({V, 2 * d}, flat_params[5], rg);
  m.bias_ = Tensor::from({V}, flat_params[6], rg);
  return m;
}

std::vector<std::pair<std::string, Tensor>> ToyVlm::named_params() {
  return {{"tok_emb", tok_emb_}, {"pos_emb", pos_emb_}, {"w_q", w_q_}, {"w_k", w_k_},
          {"w_v", w_v_},         {"w_o", w_o_},         {"bias", bias_}};
}

std::vector<std::pair<std::string, Tensor>> ToyVlm::named_params() const {
  return const_cast<ToyVlm*>(this)->named_params();
}

std::size_t ToyVlm::param_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_params()) n += t.numel();
  return n;
}

std::uint64_t ToyVlm::param_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : named_params()) {
    for (double v : t.values()) {
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(v));
      std::memcpy(&bits, &v, sizeof(bits));
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

namespace {

ForwardCounters g_forward_counters;

// Lower-triangular causal averaging matrix: row i averages positions 0..i.
Tensor causal_mean_matrix(std::size_t t) {
  std::vector<double> v(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i) {
    const double w = 1.0 / static_cast<double>(i + 1);
    for (std::size_t j = 0; j <= i; ++j) v[i * t + j] = w;
  }
  return Tensor::from({t, t}, std::move(v));
}

ForwardOutput forward_impl(const ToyVlm& model, const std::vector<double>& patch_features,
                           std::span<const int> tokens, std::size_t out_begin,
                           std::size_t out_end) {
  const auto& cfg = model.config();
  const auto P = static_cast<std::size_t>(cfg.patch_count);
  const auto F = static_cast<std::size_t>(cfg.patch_feature_dim);
  const auto d = static_cast<std::size_t>(cfg.model_dim);
  const std::size_t t = tokens.size();
  if (t > static_cast<std::size_t>(cfg.max_seq_len)) {
    throw std::invalid_argument("sequence length " + std::to_string(t) +
                                " exceeds max " + std::to_string(cfg.max_seq_len));
  }
  for (int id : tokens) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::invalid_argument("token id " + std::to_string(id) +
                                  " outside vocabulary of size " +
                                  std::to_string(cfg.vocab_size));
    }
  }
  if (patch_features.size() != P * F) {
    throw std::invalid_argument("patch features must be " + std::to_string(P) + "x" +
                                std::to_string(F));
  }

  if (grad_enabled() && !model.frozen()) {
    ++g_forward_counters.grad;
  } else {
    ++g_forward_counters.no_grad;
  }

  auto run = [&]() -> ForwardOutput {
    Tensor feats = Tensor::from({P, F}, patch_features);
    Tensor emb = add(take_rows(model.tok_emb(), tokens),
                     slice_rows(model.pos_emb(), 0, t));           // T x d
    Tensor ctx = matmul(causal_mean_matrix(t), emb);               // T x d
    Tensor q = matmul(ctx, transpose(model.w_q()));                // T x d
    Tensor keys = matmul(feats, transpose(model.w_k()));           // P x d
    Tensor vals = matmul(feats, transpose(model.w_v()));           // P x d
    Tensor scores = mul_scalar(matmul(q, transpose(keys)), 1.0 / std::sqrt(double(d)));
    Tensor att = exp(log_softmax(scores));                         // T x P
    Tensor z = matmul(att, vals);                                  // T x d
    Tensor h = concat_last(ctx, z);                                // T x 2d
    Tensor logits_all = add(matmul(h, transpose(model.w_o())), model.bias());
    ForwardOutput out;
    out.logits = slice_rows(logits_all, out_begin, out_end);
    out.log_probs = log_softmax(out.logits);
    out.attention = slice_rows(att, out_begin, out_end);
    return out;
  };

  if (model.frozen() && grad_enabled()) {
    NoGradGuard guard;
    return run();
  }
  return run();
}

}  // namespace

ForwardOutput forward(const ToyVlm& model, const std::vector<double>& patch_features,
                      std::span<const int> tokens, std::size_t prompt_len) {
  if (prompt_len < 1 || prompt_len >= tokens.size()) {
    throw std::invalid_argument("prompt length " + std::to_string(prompt_len) +
                                " invalid for sequence of length " +
                                std::to_string(tokens.size()));
  }
  return forward_impl(model, patch_features, tokens, prompt_len - 1, tokens.size() - 1);
}

std::vector<int> greedy_decode(const ToyVlm& model, const std::vector<double>& patch_features,
                               std::span<const int> prompt, std::size_t max_response_len,
                               int eos_id) {
  if (prompt.empty()) throw std::invalid_argument("greedy_decode requires a nonempty prompt");
  NoGradGuard guard;
  std::vector<int> seq(prompt.begin(), prompt.end());
  std::vector<int> response;
  const auto L = static_cast<std::size_t>(model.config().max_seq_len);
  while (response.size() < max_response_len && seq.size() < L) {
    ForwardOutput out = forward_impl(model, patch_features, seq, seq.size() - 1, seq.size());
    const auto& row = out.logits.values();
    int best = 0;
    for (int j = 1; j < model.config().vocab_size; ++j) {
      if (row[j] > row[best]) best = j;  // ties resolve to the lowest id
    }
    if (best == eos_id) break;
    response.push_back(best);
    seq.push_back(best);
  }
  return response;
}

double image_attention_mass(const ForwardOutput& output, std::size_t begin, std::size_t end,
                            std::size_t patch) {
  const std::size_t rows = output.attention.shape()[0];
  const std::size_t p = output.attention.shape()[1];
  if (begin >= end || end > rows) {
    throw std::invalid_argument("attention mass span [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " + std::to_string(rows) +
                                " rows");
  }
  if (patch >= p) throw std::invalid_argument("patch index out of range");
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += output.attention.at(i, patch);
  return acc / static_cast<double>(end - begin);
}

ForwardCounters& forward_counters() { return g_forward_counters; }
void reset_forward_counters() { g_forward_counters = ForwardCounters{}; }

// ---------------------------------------------------------------------------
// checkpointing

namespace {
constexpr int kModelFormatVersion = 1;
}

std::string model_to_json(const ToyVlm& model) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = "toy_vlm";
  const auto& c = model.config();
  j["config"] = {{"vocab_size", c.vocab_size},
                 {"patch_count", c.patch_count},
                 {"patch_feature_dim", c.patch_feature_dim},
                 {"model_dim", c.model_dim},
                 {"max_seq_len", c.max_seq_len},
                 {"init_seed", c.init_seed}};
  j["frozen"] = model.frozen();
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.named_params()) params[name] = t.values();
  j["params"] = params;
  return j.dump();
}

ToyVlm model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.contains("format_version") || j["format_version"].get<int>() != kModelFormatVersion) {
    throw std::runtime_error("unsupported model format version");
  }
  if (j.value("kind", "") != "toy_vlm") throw std::runtime_error("not a toy_vlm snapshot");
  const auto& jc = j.at("config");
  ModelConfig c;
  c.vocab_size = jc.at("vocab_size").get<int>();
  c.patch_count = jc.at("patch_count").get<int>();
  c.patch_feature_dim = jc.at("patch_feature_dim").get<int>();
  c.model_dim = jc.at("model_dim").get<int>();
  c.max_seq_len = jc.at("max_seq_len").get<int>();
  c.init_seed = jc.at("init_seed").get<std::uint64_t>();
  const auto& jp = j.at("params");
  std::vector<std::vector<double>> flat;
  for (const char* name : {"tok_emb", "pos_emb", "w_q", "w_k", "w_v", "w_o", "bias"}) {
    if (!jp.contains(name)) throw std::runtime_error(std::string("missing parameter ") + name);
    flat.push_back(jp.at(name).get<std::vector<double>>());
  }
  ToyVlm m = model_from_params(c, flat, j.value("frozen", false));
  return m;
}

void save_model(const ToyVlm& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << model_to_json(model) << '\n';
}

ToyVlm load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt model file " + path + ": " + e.what());
  }
}

}  // namespace tpo
