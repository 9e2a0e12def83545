#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tpo/datagen.hpp"
#include "tpo/model.hpp"
#include "tpo/objectives.hpp"
#include "tpo/schedule.hpp"

namespace tpo {

struct TrainConfig {
  LossConfig loss;
  int corruption_step = 500;
  CorruptionMode corruption_mode = CorruptionMode::kDiffusion;
  ScheduleConvention schedule_convention = ScheduleConvention::kBeta;
  double warmup_lr = 0.05;
  double preference_lr = 0.005;
  int warmup_epoch_cap = 40;
  // Warmup stops once held-out accuracy reaches this target. 0.98 leaves
  // the post-SFT model competent (own-distribution hallucination rate well
  // under 0.1) while keeping enough residual errors for the preference
  // stage to correct measurably.
  double warmup_target_accuracy = 0.98;
  // Accuracy is probed every this many warmup steps so the stop lands near
  // the target instead of overshooting by whole epochs.
  int warmup_check_interval = 25;
  int epochs = 4;
  std::size_t batch_size = 8;
  std::uint64_t seed = 42;
  int log_interval = 10;
  // Stop after this many optimizer steps (0 = run all epochs); the report's
  // end_progress allows resuming exactly where the run stopped.
  int max_steps = 0;
  // Diagnostic seam: forces every calibrated reward to exactly 1, making the
  // full variant coincide with plain DPO step for step.
  bool force_unit_rewards = false;
};

struct MetricRecord {
  int step = 0;  // 1-based global step
  double loss = 0.0;
  double dpo_margin = 0.0;
  double calibration_margin = 0.0;
  double mean_c_win = 1.0;
  double mean_c_lose = 1.0;
};

struct CurveSample {
  int step = 0;
  double mean_c_win = 1.0;
  double mean_c_lose = 1.0;
};

struct TrainProgress {
  int epoch = 0;
  int step_in_epoch = 0;
  int global_step = 0;
  bool operator==(const TrainProgress&) const = default;
};

struct TrainReport {
  std::vector<MetricRecord> metrics;
  std::vector<CurveSample> curve;  // one sample every log_interval steps
  double final_heldout_margin = 0.0;
  double wall_clock_sec = 0.0;
  int total_steps = 0;
  std::size_t response_count_per_step_total = 0;  // responses summed over steps
  std::uint64_t step_grad_forwards = 0;
  std::uint64_t step_nograd_forwards = 0;
  std::uint64_t cache_forwards = 0;
  TrainProgress end_progress;
  std::vector<std::vector<double>> final_velocity;  // optimizer state at exit
};

struct WarmupReport {
  std::vector<double> losses;  // one per step
  int epochs_run = 0;
  double final_heldout_accuracy = 0.0;
};

// Plain SGD with momentum 0.9; the only optimizer in the lab.
class SgdMomentum {
 public:
  SgdMomentum(double lr, std::size_t param_tensor_count) : lr_(lr), velocity_(param_tensor_count) {}

  void step(std::vector<std::pair<std::string, Tensor>>& params);

  const std::vector<std::vector<double>>& velocity() const { return velocity_; }
  void set_velocity(std::vector<std::vector<double>> v) { velocity_ = std::move(v); }
  double lr() const { return lr_; }

 private:
  double lr_;
  double momentum_ = 0.9;
  std::vector<std::vector<double>> velocity_;
};

// Teacher-forced next-token accuracy over response tokens of the chosen
// responses.
double heldout_accuracy(const ToyVlm& model, const std::vector<PreferencePair>& pairs);

// Cross-entropy training on chosen responses until heldout accuracy reaches
// the target or the epoch cap. Zero cap leaves the model untouched.
WarmupReport sft_warmup(ToyVlm& model, const std::vector<PreferencePair>& train_pairs,
                        const std::vector<PreferencePair>& heldout_pairs,
                        const TrainConfig& config);

struct PreferenceResult {
  ToyVlm reference;
  TrainReport report;
};

// Reference-side per-token rewards for a pair, as the preference stage
// caches them at load time. Deterministic given (reference, pair, config).
struct ReferenceRewards {
  std::vector<double> c_ref_w;
  std::vector<double> c_ref_l;
};
ReferenceRewards reference_rewards(const ToyVlm& reference, const PreferencePair& pair,
                                   const TrainConfig& config);

// The three-phase loop: corrupted features and reference rewards are cached
// up front, then each step recomputes the policy's calibrated rewards for
// the batch, builds the TPO (or variant) loss, and takes one SGD step.
// The reference model and its cached rewards never change.
PreferenceResult train_preference(ToyVlm& policy, const std::vector<PreferencePair>& train_pairs,
                                  const std::vector<PreferencePair>& heldout_pairs,
                                  const TrainConfig& config);

// Resume flavor: continues a run from a saved (policy, optimizer, progress)
// triple against the original frozen reference. The trajectory is
// bit-identical to an uninterrupted run with the same seed.
TrainReport train_preference_resume(ToyVlm& policy, const ToyVlm& reference,
                                    std::vector<std::vector<double>> velocity,
                                    TrainProgress progress,
                                    const std::vector<PreferencePair>& train_pairs,
                                    const std::vector<PreferencePair>& heldout_pairs,
                                    const TrainConfig& config);

struct Checkpoint {
  ToyVlm model;
  std::vector<std::vector<double>> velocity;
  TrainProgress progress;
};

void save_checkpoint(const ToyVlm& model, const std::vector<std::vector<double>>& velocity,
                     const TrainProgress& progress, const std::string& path);
// expected_config, when given, is validated against the stored one; a
// mismatch (e.g. different vocabulary size) fails loudly.
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<ModelConfig>& expected_config = std::nullopt);

// Serialization of the per-step metric stream (JSONL) and the train report.
std::string metrics_jsonl(const std::vector<MetricRecord>& metrics);
std::string train_report_json(const TrainReport& report, const TrainConfig& config);
std::string train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

}  // namespace tpo
