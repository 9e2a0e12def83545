#include "tpo/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tpo/objectives.hpp"

namespace tpo {

std::string token_dump_jsonl(const std::vector<TokenRewardDump>& dumps) {
  std::ostringstream out;
  for (const auto& d : dumps) {
    nlohmann::json j = {{"pair_id", d.pair_id},
                        {"role", to_string(d.role)},
                        {"tokens", d.tokens},
                        {"s", d.s},
                        {"c", d.c}};
    out << j.dump() << '\n';
  }
  return out.str();
}

HallucinationCounts count_hallucinations(const PreferencePair& pair,
                                         std::span<const int> decoded) {
  if (pair.prompt_kind() != PromptKind::kDescription) {
    throw std::logic_error("hallucination counting applies to description prompts");
  }
  const SceneObject& truth = pair.scene.objects[pair.queried_patch()];
  HallucinationCounts counts;
  for (int tok : decoded) {
    if (vocab::is_color(tok)) {
      ++counts.total;
      if (tok - vocab::kColorBase != truth.color) ++counts.mismatched;
    } else if (vocab::is_shape(tok)) {
      ++counts.total;
      if (tok - vocab::kShapeBase != truth.shape) ++counts.mismatched;
    }
  }
  if (counts.total == 0) {
    // A response naming no attributes grounded nothing.
    counts.total = 1;
    counts.mismatched = 1;
  }
  return counts;
}

namespace {

struct ScoredResponse {
  std::vector<double> s;
  std::vector<double> logp;
  ForwardOutput clean;
};

ScoredResponse score_response(const ToyVlm& model, const PreferencePair& pair,
                              const std::vector<double>& corrupted,
                              const std::vector<int>& response) {
  NoGradGuard guard;
  std::vector<int> seq = pair.prompt;
  seq.insert(seq.end(), response.begin(), response.end());
  ScoredResponse sr;
  sr.clean = forward(model, pair.scene.patch_features, seq, pair.prompt.size());
  ForwardOutput corr = forward(model, corrupted, seq, pair.prompt.size());
  sr.s = anchor_scores(sr.clean.logits, corr.logits, response);
  sr.logp = gather_last(sr.clean.log_probs, response).values();
  return sr;
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::string eval_report_json(const EvalReport& r) {
  nlohmann::json j;
  j["hallucination_rate"] = r.hallucination_rate;
  j["hallucinated_tokens"] = r.hallucinated_tokens;
  j["attribute_tokens"] = r.attribute_tokens;
  j["preference_margin"] = r.preference_margin;
  j["anchored_mean_s"] = r.anchored_mean_s;
  j["anchored_count"] = r.anchored_count;
  j["other_mean_s"] = r.other_mean_s;
  j["other_count"] = r.other_count;
  j["attention_mass"] = r.attention_mass;
  return j.dump(2);
}

EvalReport eval_model(const ToyVlm& model, const ToyVlm& reference,
                      const std::vector<PreferencePair>& eval_pairs, const LossConfig& config,
                      std::vector<TokenRewardDump>* dumps) {
  if (eval_pairs.empty()) throw std::invalid_argument("empty evaluation set");
  const std::uint64_t hash_before = model.param_hash();
  const NoiseSchedule schedule = build_schedule();
  EvalReport report;
  double margin_acc = 0.0;
  double anchored_acc = 0.0, other_acc = 0.0;
  double attention_acc = 0.0;
  std::size_t attention_n = 0;

  for (const auto& pair : eval_pairs) {
    const auto corrupted = corrupt(pair.scene.patch_features, pair.corruption, schedule);

    // Hallucination rate over greedy decodes of description prompts.
    if (pair.prompt_kind() == PromptKind::kDescription) {
      const auto decoded =
          greedy_decode(model, pair.scene.patch_features, pair.prompt, 8, vocab::kEos);
      const auto counts = count_hallucinations(pair, decoded);
      report.hallucinated_tokens += counts.mismatched;
      report.attribute_tokens += counts.total;
    }

    // Implicit-reward margin and anchor-score statistics, teacher-forced.
    ScoredResponse win = score_response(model, pair, corrupted, pair.chosen);
    ScoredResponse lose = score_response(model, pair, corrupted, pair.rejected);
    ScoredResponse ref_win = score_response(reference, pair, corrupted, pair.chosen);
    ScoredResponse ref_lose = score_response(reference, pair, corrupted, pair.rejected);
    const auto c_w = calibrate(win.s, ResponseRole::kWin, config.margin_a);
    const auto c_l = calibrate(lose.s, ResponseRole::kLose, config.margin_a);
    const auto c_ref_w = calibrate(ref_win.s, ResponseRole::kWin, config.margin_a);
    const auto c_ref_l = calibrate(ref_lose.s, ResponseRole::kLose, config.margin_a);
    margin_acc += implicit_reward(win.logp, ref_win.logp, c_w, c_ref_w, config.beta) -
                  implicit_reward(lose.logp, ref_lose.logp, c_l, c_ref_l, config.beta);

    for (std::size_t i = 0; i < pair.chosen.size(); ++i) {
      if (pair.anchor_tags_w[i]) {
        anchored_acc += win.s[i];
        ++report.anchored_count;
      } else {
        other_acc += win.s[i];
        ++report.other_count;
      }
    }

    if (pair.prompt_kind() == PromptKind::kDescription) {
      attention_acc += image_attention_mass(win.clean, 0, pair.chosen.size(),
                                            static_cast<std::size_t>(pair.queried_patch()));
      ++attention_n;
    }

    if (dumps) {
      dumps->push_back({pair.pair_id, ResponseRole::kWin, pair.chosen, win.s, c_w});
      dumps->push_back({pair.pair_id, ResponseRole::kLose, pair.rejected, lose.s, c_l});
    }
  }

  report.hallucination_rate =
      report.attribute_tokens
          ? static_cast<double>(report.hallucinated_tokens) / report.attribute_tokens
          : 0.0;
  report.preference_margin = margin_acc / static_cast<double>(eval_pairs.size());
  report.anchored_mean_s = report.anchored_count ? anchored_acc / report.anchored_count : 0.0;
  report.other_mean_s = report.other_count ? other_acc / report.other_count : 0.0;
  report.attention_mass = attention_n ? attention_acc / attention_n : 0.0;

  if (model.param_hash() != hash_before) {
    throw std::logic_error("evaluation mutated model parameters");
  }
  return report;
}

AnchoredScoreTable anchored_score_table(const ToyVlm& model,
                                        const std::vector<PreferencePair>& pairs) {
  const NoiseSchedule schedule = build_schedule();
  AnchoredScoreTable table;
  double acc[4] = {0, 0, 0, 0};
  std::size_t cnt[4] = {0, 0, 0, 0};
  for (const auto& pair : pairs) {
    const auto corrupted = corrupt(pair.scene.patch_features, pair.corruption, schedule);
    ScoredResponse chosen = score_response(model, pair, corrupted, pair.chosen);
    for (std::size_t i = 0; i < pair.chosen.size(); ++i) {
      const int cell = pair.anchor_tags_w[i] ? 0 : 1;
      acc[cell] += chosen.s[i];
      ++cnt[cell];
    }
    const auto decoded =
        greedy_decode(model, pair.scene.patch_features, pair.prompt, 8, vocab::kEos);
    if (!decoded.empty()) {
      ScoredResponse dec = score_response(model, pair, corrupted, decoded);
      for (std::size_t i = 0; i < decoded.size(); ++i) {
        const int cell = vocab::is_attribute(decoded[i]) ? 2 : 3;
        acc[cell] += dec.s[i];
        ++cnt[cell];
      }
    }
  }
  ScoreCell* cells[4] = {&table.chosen_anchored, &table.chosen_other, &table.decoded_anchored,
                         &table.decoded_other};
  for (int i = 0; i < 4; ++i) {
    cells[i]->count = cnt[i];
    cells[i]->mean_s = cnt[i] ? acc[i] / cnt[i] : 0.0;
  }
  return table;
}

std::string anchored_score_table_csv(const AnchoredScoreTable& t) {
  std::ostringstream out;
  out.precision(10);
  out << "source,token_class,mean_s,count\n";
  auto row = [&](const char* src, const char* cls, const ScoreCell& cell) {
    out << src << ',' << cls << ',';
    if (cell.present()) {
      out << cell.mean_s;
    } else {
      out << "absent";
    }
    out << ',' << cell.count << '\n';
  };
  row("chosen", "anchored", t.chosen_anchored);
  row("chosen", "other", t.chosen_other);
  row("decoded", "anchored", t.decoded_anchored);
  row("decoded", "other", t.decoded_other);
  return out.str();
}

// ---------------------------------------------------------------------------
// ablation sweeps

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "step") return SweepAxis::kStep;
  if (s == "a") return SweepAxis::kMarginA;
  if (s == "variant") return SweepAxis::kVariant;
  throw std::invalid_argument("unknown sweep axis: " + s);
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kStep: return "step";
    case SweepAxis::kMarginA: return "a";
    case SweepAxis::kVariant: return "variant";
  }
  return "?";
}

SweepResult run_ablation(SweepAxis axis, const std::vector<std::string>& grid,
                         const ToyVlm& warmup_model,
                         const std::vector<PreferencePair>& train_pairs,
                         const std::vector<PreferencePair>& eval_pairs,
                         const TrainConfig& base_config) {
  if (grid.empty()) throw std::invalid_argument("empty sweep grid");
  SweepResult result;
  result.axis = axis;
  for (const auto& value : grid) {
    try {
      TrainConfig config = base_config;
      switch (axis) {
        case SweepAxis::kStep: config.corruption_step = std::stoi(value); break;
        case SweepAxis::kMarginA: config.loss.margin_a = std::stod(value); break;
        case SweepAxis::kVariant: config.loss.variant = loss_variant_from_string(value); break;
      }
      ToyVlm policy = warmup_model.clone_trainable();
      PreferenceResult trained = train_preference(policy, train_pairs, eval_pairs, config);
      SweepPoint point;
      point.value = value;
      point.report = eval_model(policy, trained.reference, eval_pairs, config.loss);
      point.heldout_margin = trained.report.final_heldout_margin;
      point.train_report = std::move(trained.report);
      result.points.push_back(std::move(point));
    } catch (const std::exception& e) {
      throw std::runtime_error("sweep aborted at " + to_string(axis) + "=" + value + ": " +
                               e.what());
    }
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out.precision(10);
  out << to_string(result.axis)
      << ",hallucination_rate,preference_margin,anchored_mean_s,other_mean_s,attention_mass\n";
  for (const auto& p : result.points) {
    out << p.value << ',' << p.report.hallucination_rate << ',' << p.report.preference_margin
        << ',' << p.report.anchored_mean_s << ',' << p.report.other_mean_s << ','
        << p.report.attention_mass << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// report generation

void emit_report(const TrainReport& train_report, const TrainConfig& config,
                 const std::vector<std::pair<std::string, EvalReport>>& eval_reports,
                 const std::vector<TokenRewardDump>& dumps, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream csv(fs::path(out_dir) / "calibration_curve.csv");
    if (!csv) throw std::runtime_error("cannot write calibration_curve.csv under " + out_dir);
    csv << "step,mean_c_win,mean_c_lose\n";
    csv.precision(10);
    for (const auto& s : train_report.curve) {
      csv << s.step << ',' << s.mean_c_win << ',' << s.mean_c_lose << '\n';
    }
  }

  {
    std::ofstream ann(fs::path(out_dir) / "token_annotations.txt");
    if (!ann) throw std::runtime_error("cannot write token_annotations.txt under " + out_dir);
    char buf[64];
    for (const auto& d : dumps) {
      ann << d.pair_id << ' ' << to_string(d.role) << ':';
      for (std::size_t i = 0; i < d.tokens.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.3f", stable_sigmoid(d.s[i]));
        ann << ' ' << vocab::token_to_string(d.tokens[i]) << '[' << buf << ']';
      }
      ann << '\n';
    }
  }

  {
    std::ofstream md(fs::path(out_dir) / "report.md");
    if (!md) throw std::runtime_error("cannot write report.md under " + out_dir);
    md.precision(6);
    md << "# Training run report\n\n";
    md << "## Configuration\n\n```json\n" << train_config_json(config) << "\n```\n\n";
    md << "## Training\n\n";
    md << "- steps: " << train_report.total_steps << "\n";
    md << "- final held-out margin: " << train_report.final_heldout_margin << "\n";
    if (!train_report.metrics.empty()) {
      md << "- final loss: " << train_report.metrics.back().loss << "\n";
      md << "- final mean c (win): " << train_report.metrics.back().mean_c_win << "\n";
      md << "- final mean c (lose): " << train_report.metrics.back().mean_c_lose << "\n";
    }
    md << "\n## Evaluations\n\n";
    md << "| run | hallucination rate | margin | anchored mean s | other mean s | attention mass |\n";
    md << "|-----|--------------------:|-------:|----------------:|-------------:|---------------:|\n";
    for (const auto& [name, r] : eval_reports) {
      md << "| " << name << " | " << r.hallucination_rate << " | " << r.preference_margin
         << " | " << r.anchored_mean_s << " | " << r.other_mean_s << " | " << r.attention_mass
         << " |\n";
    }
    md << "\nCalibration curve: `calibration_curve.csv`; per-token scores: "
          "`token_annotations.txt`.\n";
  }
}

}  // namespace tpo
