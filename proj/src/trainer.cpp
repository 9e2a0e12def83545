#include "tpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tpo/rewards.hpp"
#include "tpo/rng.hpp"

namespace tpo {

void SgdMomentum::step(std::vector<std::pair<std::string, Tensor>>& params) {
  if (velocity_.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameter count");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = params[p].second;
    auto& vel = velocity_[p];
    if (vel.empty()) vel.assign(t.numel(), 0.0);
    if (vel.size() != t.numel()) {
      throw std::invalid_argument("optimizer state shape mismatch for " + params[p].first);
    }
    const auto& g = t.grad();
    auto& x = t.data();
    for (std::size_t i = 0; i < vel.size(); ++i) {
      vel[i] = momentum_ * vel[i] + g[i];
      x[i] -= lr_ * vel[i];
    }
  }
}

namespace {

std::vector<int> full_sequence(const PreferencePair& pair, const std::vector<int>& response) {
  std::vector<int> seq = pair.prompt;
  seq.insert(seq.end(), response.begin(), response.end());
  return seq;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.below(i)]);
  }
  return idx;
}

}  // namespace

double heldout_accuracy(const ToyVlm& model, const std::vector<PreferencePair>& pairs) {
  NoGradGuard guard;
  std::size_t hits = 0, total = 0;
  for (const auto& pair : pairs) {
    const auto seq = full_sequence(pair, pair.chosen);
    ForwardOutput out = forward(model, pair.scene.patch_features, seq, pair.prompt.size());
    const std::size_t v = out.logits.shape()[1];
    for (std::size_t i = 0; i < pair.chosen.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < v; ++j) {
        if (out.logits.at(i, j) > out.logits.at(i, best)) best = j;
      }
      hits += (static_cast<int>(best) == pair.chosen[i]);
      ++total;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

WarmupReport sft_warmup(ToyVlm& model, const std::vector<PreferencePair>& train_pairs,
                        const std::vector<PreferencePair>& heldout_pairs,
                        const TrainConfig& config) {
  if (model.frozen()) throw std::invalid_argument("cannot warm up a frozen model");
  WarmupReport report;
  auto params = model.named_params();
  SgdMomentum opt(config.warmup_lr, params.size());
  int global_step = 0;
  bool reached_target = false;
  for (int epoch = 0; epoch < config.warmup_epoch_cap && !reached_target; ++epoch) {
    const auto order = shuffled_indices(train_pairs.size(), mix_seed(config.seed, 1000 + epoch));
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t batch_end = std::min(order.size(), b + config.batch_size);
      Tensor batch_loss;
      for (std::size_t k = b; k < batch_end; ++k) {
        const auto& pair = train_pairs[order[k]];
        const auto seq = full_sequence(pair, pair.chosen);
        ForwardOutput out = forward(model, pair.scene.patch_features, seq, pair.prompt.size());
        Tensor nll = neg(mean(gather_last(out.log_probs, pair.chosen)));
        batch_loss = batch_loss.defined() ? add(batch_loss, nll) : nll;
      }
      batch_loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(batch_end - b));
      ++global_step;
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("warmup diverged at step " + std::to_string(global_step));
      }
      report.losses.push_back(loss_value);
      backward(batch_loss);
      opt.step(params);
      for (auto& [name, t] : params) t.zero_grad();
      if (config.warmup_check_interval > 0 &&
          global_step % config.warmup_check_interval == 0) {
        report.final_heldout_accuracy = heldout_accuracy(model, heldout_pairs);
        if (report.final_heldout_accuracy >= config.warmup_target_accuracy) {
          reached_target = true;
          break;
        }
      }
    }
    report.epochs_run = epoch + 1;
    if (!reached_target) {
      report.final_heldout_accuracy = heldout_accuracy(model, heldout_pairs);
      reached_target = report.final_heldout_accuracy >= config.warmup_target_accuracy;
    }
  }
  if (config.warmup_epoch_cap == 0) {
    report.final_heldout_accuracy = heldout_accuracy(model, heldout_pairs);
  }
  return report;
}

// ---------------------------------------------------------------------------
// preference stage

namespace {

struct ResponseCache {
  std::vector<double> logp_ref;  // per-token reference log-probs, clean image
  std::vector<double> c_ref;     // reference calibrated rewards
};

struct PairCache {
  std::vector<double> corrupted_features;
  ResponseCache win;
  ResponseCache lose;
};

struct PreferenceSetup {
  std::vector<PairCache> cache;
  NoiseSchedule schedule;
  bool needs_rewards = false;
  std::uint64_t cache_forwards = 0;
};

ResponseCache build_response_cache(const ToyVlm& reference, const PreferencePair& pair,
                                   const std::vector<double>& corrupted,
                                   const std::vector<int>& response, ResponseRole role,
                                   const TrainConfig& config, bool needs_rewards) {
  ResponseCache rc;
  const auto seq = full_sequence(pair, response);
  ForwardOutput clean = forward(reference, pair.scene.patch_features, seq, pair.prompt.size());
  Tensor logp = gather_last(clean.log_probs, response);
  rc.logp_ref = logp.values();
  if (config.force_unit_rewards || !needs_rewards) {
    rc.c_ref.assign(response.size(), 1.0);
  } else {
    ForwardOutput corr = forward(reference, corrupted, seq, pair.prompt.size());
    const auto s = anchor_scores(clean.logits, corr.logits, response);
    rc.c_ref = calibrate(s, role, config.loss.margin_a);
  }
  return rc;
}

PreferenceSetup prepare_preference_stage(const ToyVlm& reference,
                                         const std::vector<PreferencePair>& pairs,
                                         const TrainConfig& config) {
  PreferenceSetup setup;
  setup.schedule = build_schedule(config.schedule_convention);
  setup.needs_rewards =
      config.loss.variant != LossVariant::kDpo && !config.force_unit_rewards;
  const ForwardCounters before = forward_counters();
  setup.cache.reserve(pairs.size());
  for (const auto& pair : pairs) {
    PairCache pc;
    CorruptionSpec spec = pair.corruption;
    spec.mode = config.corruption_mode;
    spec.step = config.corruption_step;
    pc.corrupted_features = corrupt(pair.scene.patch_features, spec, setup.schedule);
    pc.win = build_response_cache(reference, pair, pc.corrupted_features, pair.chosen,
                                  ResponseRole::kWin, config, setup.needs_rewards);
    pc.lose = build_response_cache(reference, pair, pc.corrupted_features, pair.rejected,
                                   ResponseRole::kLose, config, setup.needs_rewards);
    setup.cache.push_back(std::move(pc));
  }
  const ForwardCounters after = forward_counters();
  setup.cache_forwards = after.no_grad - before.no_grad;
  return setup;
}

struct ResponseTerms {
  Tensor logp_theta;
  Tensor c_theta;
  std::vector<double> c_values;
};

ResponseTerms policy_response_terms(const ToyVlm& policy, const PreferencePair& pair,
                                    const PairCache& cache, const std::vector<int>& response,
                                    ResponseRole role, const TrainConfig& config,
                                    bool needs_rewards) {
  ResponseTerms terms;
  const auto seq = full_sequence(pair, response);
  // One gradient-bearing clean forward per response; its raw logit values
  // double as the clean side of the anchor scores.
  ForwardOutput clean = forward(policy, pair.scene.patch_features, seq, pair.prompt.size());
  terms.logp_theta = gather_last(clean.log_probs, response);
  if (!needs_rewards) {
    terms.c_values.assign(response.size(), 1.0);
    terms.c_theta = Tensor::vector(terms.c_values);
    return terms;
  }
  if (config.loss.differentiable_rewards) {
    ForwardOutput corr = forward(policy, cache.corrupted_features, seq, pair.prompt.size());
    Tensor s = sub(gather_last(clean.logits, response), gather_last(corr.logits, response));
    Tensor sig = sigmoid(s);
    terms.c_theta = (role == ResponseRole::kWin)
                        ? add_scalar(sig, config.loss.margin_a)
                        : add_scalar(neg(sig), config.loss.margin_a + 1.0);
    terms.c_values = terms.c_theta.values();
    return terms;
  }
  NoGradGuard guard;
  ForwardOutput corr = forward(policy, cache.corrupted_features, seq, pair.prompt.size());
  const auto s = anchor_scores(clean.logits, corr.logits, response);
  terms.c_values = calibrate(s, role, config.loss.margin_a);
  terms.c_theta = Tensor::vector(terms.c_values);
  return terms;
}

double final_margin(const ToyVlm& policy, const ToyVlm& reference,
                    const std::vector<PreferencePair>& heldout, const PreferenceSetup& setup,
                    const TrainConfig& config) {
  if (heldout.empty()) return 0.0;
  NoGradGuard guard;
  double acc = 0.0;
  for (const auto& pair : heldout) {
    CorruptionSpec spec = pair.corruption;
    spec.mode = config.corruption_mode;
    spec.step = config.corruption_step;
    const auto corrupted = corrupt(pair.scene.patch_features, spec, setup.schedule);
    double rewards[2];
    const std::vector<int>* responses[2] = {&pair.chosen, &pair.rejected};
    const ResponseRole roles[2] = {ResponseRole::kWin, ResponseRole::kLose};
    for (int r = 0; r < 2; ++r) {
      const auto seq = full_sequence(pair, *responses[r]);
      ForwardOutput pol_clean = forward(policy, pair.scene.patch_features, seq, pair.prompt.size());
      ForwardOutput ref_clean = forward(reference, pair.scene.patch_features, seq, pair.prompt.size());
      std::vector<double> c_theta(responses[r]->size(), 1.0), c_ref(responses[r]->size(), 1.0);
      if (setup.needs_rewards) {
        ForwardOutput pol_corr = forward(policy, corrupted, seq, pair.prompt.size());
        ForwardOutput ref_corr = forward(reference, corrupted, seq, pair.prompt.size());
        c_theta = calibrate(anchor_scores(pol_clean.logits, pol_corr.logits, *responses[r]),
                            roles[r], config.loss.margin_a);
        c_ref = calibrate(anchor_scores(ref_clean.logits, ref_corr.logits, *responses[r]),
                          roles[r], config.loss.margin_a);
      }
      rewards[r] = implicit_reward(gather_last(pol_clean.log_probs, *responses[r]).values(),
                                   gather_last(ref_clean.log_probs, *responses[r]).values(),
                                   c_theta, c_ref, config.loss.beta);
    }
    acc += rewards[0] - rewards[1];
  }
  return acc / static_cast<double>(heldout.size());
}

TrainReport run_preference_loop(ToyVlm& policy, const ToyVlm& reference,
                                std::vector<std::vector<double>> velocity,
                                TrainProgress progress,
                                const std::vector<PreferencePair>& train_pairs,
                                const std::vector<PreferencePair>& heldout_pairs,
                                const TrainConfig& config) {
  if (policy.frozen()) throw std::invalid_argument("policy must be trainable");
  if (!reference.frozen()) throw std::invalid_argument("reference must be frozen");
  if (train_pairs.empty()) throw std::invalid_argument("empty training set");
  const auto t0 = std::chrono::steady_clock::now();

  PreferenceSetup setup = prepare_preference_stage(reference, train_pairs, config);

  TrainReport report;
  report.cache_forwards = setup.cache_forwards;
  auto params = policy.named_params();
  SgdMomentum opt(config.preference_lr, params.size());
  if (!velocity.empty()) opt.set_velocity(std::move(velocity));

  const ForwardCounters loop_start = forward_counters();
  int global_step = progress.global_step;
  TrainProgress end_progress = progress;
  bool stopped = false;
  // Curve samples average the calibrated rewards over every win/lose token
  // seen since the previous sample; per-batch means stay in the metric
  // stream.
  double window_c_win = 0.0, window_c_lose = 0.0;
  std::size_t window_n_win = 0, window_n_lose = 0;
  for (int epoch = progress.epoch; epoch < config.epochs && !stopped; ++epoch) {
    const auto order = shuffled_indices(train_pairs.size(), mix_seed(config.seed, 2000 + epoch));
    const int start_batch = (epoch == progress.epoch) ? progress.step_in_epoch : 0;
    int batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size, ++batch_index) {
      if (batch_index < start_batch) continue;
      if (config.max_steps > 0 && global_step >= config.max_steps) {
        end_progress = {epoch, batch_index, global_step};
        stopped = true;
        break;
      }
      const std::size_t batch_end = std::min(order.size(), b + config.batch_size);
      const std::size_t batch_n = batch_end - b;

      Tensor batch_loss;
      double sum_dpo = 0.0, sum_calib = 0.0;
      double batch_c_win = 0.0, batch_c_lose = 0.0;
      std::size_t batch_n_win = 0, batch_n_lose = 0;
      for (std::size_t k = b; k < batch_end; ++k) {
        const auto& pair = train_pairs[order[k]];
        const auto& cache = setup.cache[order[k]];
        ResponseTerms win = policy_response_terms(policy, pair, cache, pair.chosen,
                                                  ResponseRole::kWin, config, setup.needs_rewards);
        ResponseTerms lose = policy_response_terms(policy, pair, cache, pair.rejected,
                                                   ResponseRole::kLose, config, setup.needs_rewards);
        PairTerms terms;
        terms.logp_theta_w = win.logp_theta;
        terms.logp_ref_w = Tensor::vector(cache.win.logp_ref);
        terms.logp_theta_l = lose.logp_theta;
        terms.logp_ref_l = Tensor::vector(cache.lose.logp_ref);
        terms.c_theta_w = win.c_theta;
        terms.c_ref_w = Tensor::vector(cache.win.c_ref);
        terms.c_theta_l = lose.c_theta;
        terms.c_ref_l = Tensor::vector(cache.lose.c_ref);
        auto [loss, breakdown] = tpo_loss(terms, config.loss);
        batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
        sum_dpo += breakdown.dpo_margin;
        sum_calib += breakdown.calibration_margin;
        for (double c : win.c_values) {
          batch_c_win += c;
          window_c_win += c;
        }
        for (double c : lose.c_values) {
          batch_c_lose += c;
          window_c_lose += c;
        }
        batch_n_win += win.c_values.size();
        batch_n_lose += lose.c_values.size();
        window_n_win += win.c_values.size();
        window_n_lose += lose.c_values.size();
      }
      batch_loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(batch_n));
      ++global_step;
      const double loss_value = batch_loss.item();
      if (!std::isfinite(loss_value)) {
        std::string ids;
        for (std::size_t k = b; k < batch_end; ++k) {
          if (!ids.empty()) ids += ", ";
          ids += train_pairs[order[k]].pair_id;
        }
        throw std::runtime_error("non-finite loss at step " + std::to_string(global_step) +
                                 " (pairs: " + ids + ")");
      }
      backward(batch_loss);
      opt.step(params);
      for (auto& [name, t] : params) t.zero_grad();

      MetricRecord rec;
      rec.step = global_step;
      rec.loss = loss_value;
      rec.dpo_margin = sum_dpo / static_cast<double>(batch_n);
      rec.calibration_margin = sum_calib / static_cast<double>(batch_n);
      rec.mean_c_win = batch_n_win ? batch_c_win / static_cast<double>(batch_n_win) : 1.0;
      rec.mean_c_lose = batch_n_lose ? batch_c_lose / static_cast<double>(batch_n_lose) : 1.0;
      report.metrics.push_back(rec);
      report.response_count_per_step_total += 2 * batch_n;
      if (config.log_interval > 0 && global_step % config.log_interval == 0) {
        CurveSample sample;
        sample.step = global_step;
        sample.mean_c_win =
            window_n_win ? window_c_win / static_cast<double>(window_n_win) : 1.0;
        sample.mean_c_lose =
            window_n_lose ? window_c_lose / static_cast<double>(window_n_lose) : 1.0;
        report.curve.push_back(sample);
        window_c_win = window_c_lose = 0.0;
        window_n_win = window_n_lose = 0;
      }
    }
  }
  const ForwardCounters loop_end = forward_counters();
  report.step_grad_forwards = loop_end.grad - loop_start.grad;
  report.step_nograd_forwards = loop_end.no_grad - loop_start.no_grad;
  report.total_steps = global_step;
  if (!stopped) end_progress = {config.epochs, 0, global_step};
  report.end_progress = end_progress;
  report.final_velocity = opt.velocity();
  report.final_heldout_margin = final_margin(policy, reference, heldout_pairs, setup, config);
  report.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace

ReferenceRewards reference_rewards(const ToyVlm& reference, const PreferencePair& pair,
                                   const TrainConfig& config) {
  const NoiseSchedule schedule = build_schedule(config.schedule_convention);
  CorruptionSpec spec = pair.corruption;
  spec.mode = config.corruption_mode;
  spec.step = config.corruption_step;
  const auto corrupted = corrupt(pair.scene.patch_features, spec, schedule);
  const bool needs = config.loss.variant != LossVariant::kDpo && !config.force_unit_rewards;
  ReferenceRewards out;
  out.c_ref_w = build_response_cache(reference, pair, corrupted, pair.chosen,
                                     ResponseRole::kWin, config, needs)
                    .c_ref;
  out.c_ref_l = build_response_cache(reference, pair, corrupted, pair.rejected,
                                     ResponseRole::kLose, config, needs)
                    .c_ref;
  return out;
}

PreferenceResult train_preference(ToyVlm& policy, const std::vector<PreferencePair>& train_pairs,
                                  const std::vector<PreferencePair>& heldout_pairs,
                                  const TrainConfig& config) {
  PreferenceResult result{policy.clone_frozen(), {}};
  result.report = run_preference_loop(policy, result.reference, {}, TrainProgress{}, train_pairs,
                                      heldout_pairs, config);
  return result;
}

TrainReport train_preference_resume(ToyVlm& policy, const ToyVlm& reference,
                                    std::vector<std::vector<double>> velocity,
                                    TrainProgress progress,
                                    const std::vector<PreferencePair>& train_pairs,
                                    const std::vector<PreferencePair>& heldout_pairs,
                                    const TrainConfig& config) {
  return run_preference_loop(policy, reference, std::move(velocity), progress, train_pairs,
                             heldout_pairs, config);
}

// ---------------------------------------------------------------------------
// checkpoints and serialization

namespace {
constexpr int kCheckpointVersion = 1;
}

void save_checkpoint(const ToyVlm& model, const std::vector<std::vector<double>>& velocity,
                     const TrainProgress& progress, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["kind"] = "trainer_checkpoint";
  j["model"] = nlohmann::json::parse(model_to_json(model));
  j["velocity"] = velocity;
  j["progress"] = {{"epoch", progress.epoch},
                   {"step_in_epoch", progress.step_in_epoch},
                   {"global_step", progress.global_step}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<ModelConfig>& expected_config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("corrupt checkpoint file " + path);
  if (j.value("format_version", -1) != kCheckpointVersion ||
      j.value("kind", "") != "trainer_checkpoint") {
    throw std::runtime_error("unsupported checkpoint format in " + path);
  }
  Checkpoint ck{model_from_json(j.at("model").dump()), {}, {}};
  if (expected_config && !(ck.model.config() == *expected_config)) {
    throw std::runtime_error("checkpoint config mismatch: " + path +
                             " was saved with a different model configuration");
  }
  ck.velocity = j.at("velocity").get<std::vector<std::vector<double>>>();
  const auto& jp = j.at("progress");
  ck.progress.epoch = jp.at("epoch").get<int>();
  ck.progress.step_in_epoch = jp.at("step_in_epoch").get<int>();
  ck.progress.global_step = jp.at("global_step").get<int>();
  return ck;
}

std::string metrics_jsonl(const std::vector<MetricRecord>& metrics) {
  std::ostringstream out;
  for (const auto& m : metrics) {
    nlohmann::json j = {{"step", m.step},
                        {"loss", m.loss},
                        {"dpo_margin", m.dpo_margin},
                        {"calibration_margin", m.calibration_margin},
                        {"mean_c_win", m.mean_c_win},
                        {"mean_c_lose", m.mean_c_lose}};
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string train_config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["beta"] = c.loss.beta;
  j["a"] = c.loss.margin_a;
  j["variant"] = to_string(c.loss.variant);
  j["differentiable_c"] = c.loss.differentiable_rewards;
  j["step"] = c.corruption_step;
  j["corruption_mode"] = to_string(c.corruption_mode);
  j["literal_xi"] = c.schedule_convention == ScheduleConvention::kLiteralXi;
  j["warmup_lr"] = c.warmup_lr;
  j["preference_lr"] = c.preference_lr;
  j["warmup_epoch_cap"] = c.warmup_epoch_cap;
  j["warmup_target_accuracy"] = c.warmup_target_accuracy;
  j["warmup_check_interval"] = c.warmup_check_interval;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["log_interval"] = c.log_interval;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  TrainConfig c;
  c.loss.beta = j.value("beta", c.loss.beta);
  c.loss.margin_a = j.value("a", c.loss.margin_a);
  if (j.contains("variant")) c.loss.variant = loss_variant_from_string(j["variant"]);
  c.loss.differentiable_rewards = j.value("differentiable_c", false);
  c.corruption_step = j.value("step", c.corruption_step);
  if (j.contains("corruption_mode")) {
    c.corruption_mode = corruption_mode_from_string(j["corruption_mode"]);
  }
  if (j.value("literal_xi", false)) c.schedule_convention = ScheduleConvention::kLiteralXi;
  c.warmup_lr = j.value("warmup_lr", c.warmup_lr);
  c.preference_lr = j.value("preference_lr", c.preference_lr);
  c.warmup_epoch_cap = j.value("warmup_epoch_cap", c.warmup_epoch_cap);
  c.warmup_target_accuracy = j.value("warmup_target_accuracy", c.warmup_target_accuracy);
  c.warmup_check_interval = j.value("warmup_check_interval", c.warmup_check_interval);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.log_interval = j.value("log_interval", c.log_interval);
  return c;
}

std::string train_report_json(const TrainReport& report, const TrainConfig& config) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(train_config_json(config));
  j["total_steps"] = report.total_steps;
  j["final_heldout_margin"] = report.final_heldout_margin;
  j["wall_clock_sec"] = report.wall_clock_sec;
  j["cache_forwards"] = report.cache_forwards;
  j["step_grad_forwards"] = report.step_grad_forwards;
  j["step_nograd_forwards"] = report.step_nograd_forwards;
  j["responses_total"] = report.response_count_per_step_total;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& s : report.curve) {
    curve.push_back({{"step", s.step}, {"mean_c_win", s.mean_c_win}, {"mean_c_lose", s.mean_c_lose}});
  }
  j["calibration_curve"] = curve;
  return j.dump(2);
}

}  // namespace tpo
