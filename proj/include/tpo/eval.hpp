#pragma once

#include <span>
#include <string>
#include <vector>

#include "tpo/datagen.hpp"
#include "tpo/model.hpp"
#include "tpo/rewards.hpp"
#include "tpo/trainer.hpp"

namespace tpo {

struct TokenRewardDump {
  std::string pair_id;
  ResponseRole role = ResponseRole::kWin;
  std::vector<int> tokens;
  std::vector<double> s;
  std::vector<double> c;
};

std::string token_dump_jsonl(const std::vector<TokenRewardDump>& dumps);

struct HallucinationCounts {
  std::size_t mismatched = 0;
  std::size_t total = 0;
};

// Judges a decoded description response against the scene: every decoded
// color/shape token is compared with the queried patch. A decode with no
// attribute tokens counts as one ungrounded token.
HallucinationCounts count_hallucinations(const PreferencePair& pair, std::span<const int> decoded);

struct EvalReport {
  double hallucination_rate = 0.0;
  std::size_t hallucinated_tokens = 0;
  std::size_t attribute_tokens = 0;
  double preference_margin = 0.0;  // mean implicit-reward gap win - lose
  double anchored_mean_s = 0.0;
  std::size_t anchored_count = 0;
  double other_mean_s = 0.0;
  std::size_t other_count = 0;
  double attention_mass = 0.0;  // mean mass on the queried patch
};

std::string eval_report_json(const EvalReport& report);

// Greedy-decodes description prompts, measures the implicit-reward margin on
// (y_w, y_l), splits anchor scores by tag, and measures attention mass on
// the queried patch. Never mutates the models. Per-token rewards for the
// chosen/rejected responses are appended to dumps when given.
EvalReport eval_model(const ToyVlm& model, const ToyVlm& reference,
                      const std::vector<PreferencePair>& eval_pairs, const LossConfig& config,
                      std::vector<TokenRewardDump>* dumps = nullptr);

struct ScoreCell {
  double mean_s = 0.0;
  std::size_t count = 0;
  bool present() const { return count > 0; }
};

// {anchored, other} x {chosen responses, policy-decoded responses}.
struct AnchoredScoreTable {
  ScoreCell chosen_anchored, chosen_other;
  ScoreCell decoded_anchored, decoded_other;
};

AnchoredScoreTable anchored_score_table(const ToyVlm& model,
                                        const std::vector<PreferencePair>& pairs);
std::string anchored_score_table_csv(const AnchoredScoreTable& table);

enum class SweepAxis { kStep, kMarginA, kVariant };
SweepAxis sweep_axis_from_string(const std::string& s);
std::string to_string(SweepAxis axis);

struct SweepPoint {
  std::string value;
  EvalReport report;
  double heldout_margin = 0.0;
  TrainReport train_report;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::kStep;
  std::vector<SweepPoint> points;
};

// Trains one policy per grid value starting from the same warmup model and
// seed, evaluating each against its own run's frozen reference.
SweepResult run_ablation(SweepAxis axis, const std::vector<std::string>& grid,
                         const ToyVlm& warmup_model,
                         const std::vector<PreferencePair>& train_pairs,
                         const std::vector<PreferencePair>& eval_pairs,
                         const TrainConfig& base_config);

std::string sweep_csv(const SweepResult& result);

// Writes report.md, calibration_curve.csv and token_annotations.txt under
// out_dir. Regeneration from the same inputs is byte-identical.
void emit_report(const TrainReport& train_report, const TrainConfig& config,
                 const std::vector<std::pair<std::string, EvalReport>>& eval_reports,
                 const std::vector<TokenRewardDump>& dumps, const std::string& out_dir);

}  // namespace tpo
