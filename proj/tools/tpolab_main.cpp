#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpo/datagen.hpp"
#include "tpo/eval.hpp"
#include "tpo/model.hpp"
#include "tpo/schedule.hpp"
#include "tpo/trainer.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct GenerateArgs {
  std::size_t count = 2000;
  std::size_t eval_count = 500;
  std::uint64_t seed = 42;
  int step = 500;
  std::string out;
};

int run_generate(const GenerateArgs& args) {
  fs::create_directories(args.out);
  tpo::DatagenOptions options;
  options.corruption_step = args.step;
  auto train = tpo::generate_dataset(args.count, args.seed, options);
  tpo::write_dataset(train, (fs::path(args.out) / "train.jsonl").string());
  if (args.eval_count > 0) {
    auto eval = tpo::generate_dataset(args.eval_count, args.seed, options, args.count);
    tpo::write_dataset(eval, (fs::path(args.out) / "eval.jsonl").string());
  }
  tpo::write_vocab_file((fs::path(args.out) / "vocab.json").string());
  write_text(fs::path(args.out) / "schedule.csv", tpo::schedule_csv(tpo::build_schedule()));
  std::cout << "wrote " << args.count << " train / " << args.eval_count << " eval pairs to "
            << args.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string variant = "full";
  double beta = 0.1;
  double margin_a = 0.5;
  int step = 500;
  int epochs = 4;
  std::uint64_t seed = 42;
  bool white_image = false;
  bool literal_xi = false;
  bool differentiable_c = false;
  double warmup_lr = 0.05;
  double preference_lr = 0.005;
  std::size_t batch_size = 8;
  int log_interval = 10;
};

tpo::TrainConfig to_train_config(const TrainArgs& args) {
  tpo::TrainConfig config;
  config.loss.variant = tpo::loss_variant_from_string(args.variant);
  config.loss.beta = args.beta;
  config.loss.margin_a = args.margin_a;
  config.loss.differentiable_rewards = args.differentiable_c;
  config.corruption_step = args.step;
  config.corruption_mode =
      args.white_image ? tpo::CorruptionMode::kWhite : tpo::CorruptionMode::kDiffusion;
  config.schedule_convention = args.literal_xi ? tpo::ScheduleConvention::kLiteralXi
                                               : tpo::ScheduleConvention::kBeta;
  config.epochs = args.epochs;
  config.seed = args.seed;
  config.warmup_lr = args.warmup_lr;
  config.preference_lr = args.preference_lr;
  config.batch_size = args.batch_size;
  config.log_interval = args.log_interval;
  return config;
}

int run_train(const TrainArgs& args) {
  const auto train_pairs = tpo::read_dataset((fs::path(args.data) / "train.jsonl").string());
  const auto eval_path = fs::path(args.data) / "eval.jsonl";
  std::vector<tpo::PreferencePair> eval_pairs;
  if (fs::exists(eval_path)) eval_pairs = tpo::read_dataset(eval_path.string());
  const tpo::TrainConfig config = to_train_config(args);

  fs::create_directories(args.out);
  tpo::ModelConfig model_config;
  model_config.init_seed = config.seed;
  tpo::ToyVlm policy = tpo::ToyVlm::init(model_config);

  auto warmup = tpo::sft_warmup(policy, train_pairs, eval_pairs, config);
  tpo::save_model(policy, (fs::path(args.out) / "warmup.json").string());
  std::cout << "warmup: " << warmup.epochs_run << " epochs, held-out accuracy "
            << warmup.final_heldout_accuracy << "\n";

  auto result = tpo::train_preference(policy, train_pairs, eval_pairs, config);
  tpo::save_model(policy, (fs::path(args.out) / "policy_final.json").string());
  tpo::save_model(result.reference, (fs::path(args.out) / "reference.json").string());
  write_text(fs::path(args.out) / "metrics.jsonl", tpo::metrics_jsonl(result.report.metrics));
  write_text(fs::path(args.out) / "train_report.json",
             tpo::train_report_json(result.report, config));
  write_text(fs::path(args.out) / "train_config.json", tpo::train_config_json(config));

  std::vector<tpo::TokenRewardDump> dumps;
  std::vector<std::pair<std::string, tpo::EvalReport>> evals;
  if (!eval_pairs.empty()) {
    tpo::EvalReport report =
        tpo::eval_model(policy, result.reference, eval_pairs, config.loss, &dumps);
    write_text(fs::path(args.out) / "eval_report.json", tpo::eval_report_json(report));
    write_text(fs::path(args.out) / "token_rewards.jsonl", tpo::token_dump_jsonl(dumps));
    evals.emplace_back("post-train", report);
    std::cout << "eval: hallucination rate " << report.hallucination_rate << ", margin "
              << report.preference_margin << "\n";
  }
  tpo::emit_report(result.report, config, evals, dumps, args.out);
  std::cout << "final held-out margin " << result.report.final_heldout_margin << "\n";
  return 0;
}

struct EvalArgs {
  std::string model;
  std::string ref;
  std::string data;
  std::string out;
  double beta = 0.1;
  double margin_a = 0.5;
};

int run_eval(const EvalArgs& args) {
  tpo::ToyVlm model = tpo::load_model(args.model);
  tpo::ToyVlm reference = tpo::load_model(args.ref);
  if (!(model.config() == reference.config())) {
    throw std::runtime_error("model and reference configurations differ");
  }
  const auto eval_path = fs::path(args.data) / "eval.jsonl";
  const auto pairs = tpo::read_dataset(
      fs::exists(eval_path) ? eval_path.string() : (fs::path(args.data) / "train.jsonl").string());
  tpo::LossConfig loss;
  loss.beta = args.beta;
  loss.margin_a = args.margin_a;
  std::vector<tpo::TokenRewardDump> dumps;
  tpo::EvalReport report = tpo::eval_model(model, reference, pairs, loss, &dumps);
  fs::create_directories(args.out);
  write_text(fs::path(args.out) / "eval_report.json", tpo::eval_report_json(report));
  write_text(fs::path(args.out) / "token_rewards.jsonl", tpo::token_dump_jsonl(dumps));
  write_text(fs::path(args.out) / "anchored_score_table.csv",
             tpo::anchored_score_table_csv(tpo::anchored_score_table(model, pairs)));
  std::cout << tpo::eval_report_json(report) << "\n";
  return 0;
}

struct AblateArgs {
  std::string axis;
  std::vector<std::string> grid;
  std::string base_config;
  std::string data;
  std::string out;
};

std::vector<std::string> default_grid(tpo::SweepAxis axis) {
  switch (axis) {
    case tpo::SweepAxis::kStep: return {"0", "250", "500", "750", "999"};
    case tpo::SweepAxis::kMarginA: return {"0", "0.5", "1"};
    case tpo::SweepAxis::kVariant:
      return {"full", "only-win", "only-loss", "opposite", "dpo"};
  }
  return {};
}

int run_ablate(const AblateArgs& args) {
  tpo::TrainConfig base;
  std::string data_dir = args.data;
  if (!args.base_config.empty()) {
    const auto text = read_text(args.base_config);
    base = tpo::train_config_from_json(text);
    if (data_dir.empty()) {
      auto j = nlohmann::json::parse(text);
      if (j.contains("data")) data_dir = j["data"].get<std::string>();
    }
  }
  if (data_dir.empty()) throw std::runtime_error("no dataset given (--data or config 'data')");

  const auto train_pairs = tpo::read_dataset((fs::path(data_dir) / "train.jsonl").string());
  const auto eval_pairs = tpo::read_dataset((fs::path(data_dir) / "eval.jsonl").string());

  tpo::ModelConfig model_config;
  model_config.init_seed = base.seed;
  tpo::ToyVlm warmup_model = tpo::ToyVlm::init(model_config);
  tpo::sft_warmup(warmup_model, train_pairs, eval_pairs, base);

  const auto axis = tpo::sweep_axis_from_string(args.axis);
  const auto grid = args.grid.empty() ? default_grid(axis) : args.grid;
  auto result = tpo::run_ablation(axis, grid, warmup_model, train_pairs, eval_pairs, base);

  fs::create_directories(args.out);
  write_text(fs::path(args.out) / "sweep_summary.csv", tpo::sweep_csv(result));
  for (const auto& point : result.points) {
    const fs::path dir = fs::path(args.out) / (args.axis + "_" + point.value);
    fs::create_directories(dir);
    write_text(dir / "eval_report.json", tpo::eval_report_json(point.report));
    write_text(dir / "metrics.jsonl", tpo::metrics_jsonl(point.train_report.metrics));
  }
  std::cout << tpo::sweep_csv(result);
  return 0;
}

struct ReportArgs {
  std::string run;
  std::string out;
};

int run_report(const ReportArgs& args) {
  const fs::path run_dir(args.run);
  const tpo::TrainConfig config =
      tpo::train_config_from_json(read_text(run_dir / "train_config.json"));

  tpo::TrainReport train_report;
  {
    auto j = nlohmann::json::parse(read_text(run_dir / "train_report.json"));
    train_report.total_steps = j.value("total_steps", 0);
    train_report.final_heldout_margin = j.value("final_heldout_margin", 0.0);
    for (const auto& s : j.value("calibration_curve", nlohmann::json::array())) {
      train_report.curve.push_back(
          {s.at("step").get<int>(), s.at("mean_c_win").get<double>(),
           s.at("mean_c_lose").get<double>()});
    }
  }
  {
    std::istringstream metrics(read_text(run_dir / "metrics.jsonl"));
    std::string line;
    while (std::getline(metrics, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      tpo::MetricRecord m;
      m.step = j.at("step").get<int>();
      m.loss = j.at("loss").get<double>();
      m.dpo_margin = j.at("dpo_margin").get<double>();
      m.calibration_margin = j.at("calibration_margin").get<double>();
      m.mean_c_win = j.at("mean_c_win").get<double>();
      m.mean_c_lose = j.at("mean_c_lose").get<double>();
      train_report.metrics.push_back(m);
    }
  }

  std::vector<std::pair<std::string, tpo::EvalReport>> evals;
  if (fs::exists(run_dir / "eval_report.json")) {
    auto j = nlohmann::json::parse(read_text(run_dir / "eval_report.json"));
    tpo::EvalReport r;
    r.hallucination_rate = j.value("hallucination_rate", 0.0);
    r.hallucinated_tokens = j.value("hallucinated_tokens", 0);
    r.attribute_tokens = j.value("attribute_tokens", 0);
    r.preference_margin = j.value("preference_margin", 0.0);
    r.anchored_mean_s = j.value("anchored_mean_s", 0.0);
    r.anchored_count = j.value("anchored_count", 0);
    r.other_mean_s = j.value("other_mean_s", 0.0);
    r.other_count = j.value("other_count", 0);
    r.attention_mass = j.value("attention_mass", 0.0);
    evals.emplace_back("post-train", r);
  }

  std::vector<tpo::TokenRewardDump> dumps;
  if (fs::exists(run_dir / "token_rewards.jsonl")) {
    std::istringstream in(read_text(run_dir / "token_rewards.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line);
      tpo::TokenRewardDump d;
      d.pair_id = j.at("pair_id").get<std::string>();
      d.role = j.at("role").get<std::string>() == "win" ? tpo::ResponseRole::kWin
                                                        : tpo::ResponseRole::kLose;
      d.tokens = j.at("tokens").get<std::vector<int>>();
      d.s = j.at("s").get<std::vector<double>>();
      d.c = j.at("c").get<std::vector<double>>();
      dumps.push_back(std::move(d));
    }
  }

  tpo::emit_report(train_report, config, evals, dumps, args.out);
  std::cout << "report written to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Token-level, visually anchored preference optimization lab"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate-data", "Generate a synthetic preference dataset");
  cmd_gen->add_option("--count", gen.count, "Training pair count");
  cmd_gen->add_option("--seed", gen.seed, "Master seed");
  cmd_gen->add_option("--step", gen.step, "Corruption step recorded per pair")
      ->check(CLI::Range(0, tpo::kScheduleSteps - 1));
  cmd_gen->add_option("--out", gen.out, "Output directory")->required();
  cmd_gen->add_option("--eval-count", gen.eval_count, "Held-out pair count");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train", "SFT warmup followed by preference training");
  cmd_train->add_option("--data", train.data, "Dataset directory")->required();
  cmd_train->add_option("--variant", train.variant, "full|dpo|only-win|only-loss|opposite");
  cmd_train->add_option("--beta", train.beta, "KL strength");
  cmd_train->add_option("--a", train.margin_a, "Calibration margin");
  cmd_train->add_option("--step", train.step, "Corruption step")
      ->check(CLI::Range(0, tpo::kScheduleSteps - 1));
  cmd_train->add_option("--epochs", train.epochs, "Preference epochs");
  cmd_train->add_option("--seed", train.seed, "Seed");
  cmd_train->add_option("--out", train.out, "Output directory")->required();
  cmd_train->add_flag("--white-image", train.white_image, "Blank-image corruption");
  cmd_train->add_flag("--literal-xi", train.literal_xi,
                      "Use the schedule formula as xi directly");
  cmd_train->add_flag("--differentiable-c", train.differentiable_c,
                      "Backpropagate through the calibrated rewards");
  cmd_train->add_option("--warmup-lr", train.warmup_lr, "Warmup learning rate");
  cmd_train->add_option("--preference-lr", train.preference_lr, "Preference learning rate");
  cmd_train->add_option("--batch-size", train.batch_size, "Batch size");
  cmd_train->add_option("--log-interval", train.log_interval, "Curve sampling interval");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a model against a reference");
  cmd_eval->add_option("--model", eval.model, "Model checkpoint")->required();
  cmd_eval->add_option("--ref", eval.ref, "Reference checkpoint")->required();
  cmd_eval->add_option("--data", eval.data, "Dataset directory")->required();
  cmd_eval->add_option("--out", eval.out, "Output directory")->required();
  cmd_eval->add_option("--beta", eval.beta, "KL strength");
  cmd_eval->add_option("--a", eval.margin_a, "Calibration margin");

  AblateArgs ablate;
  auto* cmd_ablate = app.add_subcommand("ablate", "Sweep one axis from a shared warmup");
  cmd_ablate->add_option("--axis", ablate.axis, "step|a|variant")->required();
  cmd_ablate->add_option("--grid", ablate.grid, "Grid values (defaults per axis)")
      ->delimiter(',');
  cmd_ablate->add_option("--base-config", ablate.base_config, "Base train config JSON");
  cmd_ablate->add_option("--data", ablate.data, "Dataset directory");
  cmd_ablate->add_option("--out", ablate.out, "Output directory")->required();

  ReportArgs report;
  auto* cmd_report = app.add_subcommand("report", "Regenerate report files from a run directory");
  cmd_report->add_option("--run", report.run, "Run directory")->required();
  cmd_report->add_option("--out", report.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_eval->parsed()) return run_eval(eval);
    if (cmd_ablate->parsed()) return run_ablate(ablate);
    if (cmd_report->parsed()) return run_report(report);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
