#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "tpo/datagen.hpp"
#include "tpo/eval.hpp"
#include "tpo/model.hpp"
#include "tpo/objectives.hpp"
#include "tpo/rewards.hpp"
#include "tpo/schedule.hpp"
#include "tpo/trainer.hpp"

namespace py = pybind11;
using namespace tpo;

namespace {

std::vector<double> flatten_features(const py::array_t<double>& features, int patches,
                                     int feature_dim) {
  auto buf = features.unchecked<2>();
  if (buf.shape(0) != patches || buf.shape(1) != feature_dim) {
    throw std::invalid_argument("patch features must be patch_count x patch_feature_dim");
  }
  std::vector<double> flat(static_cast<std::size_t>(patches) * feature_dim);
  for (int p = 0; p < patches; ++p) {
    for (int f = 0; f < feature_dim; ++f) flat[p * feature_dim + f] = buf(p, f);
  }
  return flat;
}

py::array_t<double> matrix_array(const Tensor& t) {
  const auto rows = t.shape()[0];
  const auto cols = t.shape()[1];
  py::array_t<double> out({rows, cols});
  auto buf = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) buf(i, j) = t.at(i, j);
  }
  return out;
}

Tensor matrix_tensor(const py::array_t<double>& a) {
  auto buf = a.unchecked<2>();
  std::vector<double> v(static_cast<std::size_t>(buf.shape(0) * buf.shape(1)));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i) {
    for (py::ssize_t j = 0; j < buf.shape(1); ++j) v[i * buf.shape(1) + j] = buf(i, j);
  }
  return Tensor::from({static_cast<std::size_t>(buf.shape(0)),
                       static_cast<std::size_t>(buf.shape(1))},
                      std::move(v));
}

ResponseRole role_from_string(const std::string& s) {
  if (s == "win") return ResponseRole::kWin;
  if (s == "lose") return ResponseRole::kLose;
  throw std::invalid_argument("role must be 'win' or 'lose'");
}

LossConfig loss_config_from_kwargs(double beta, double a, const std::string& variant) {
  LossConfig config;
  config.beta = beta;
  config.margin_a = a;
  config.variant = loss_variant_from_string(variant);
  return config;
}

}  // namespace

PYBIND11_MODULE(tpolab, m) {
  m.doc() = "Token-level, visually anchored preference optimization lab";

  // ---------------------------------------------------------------- schedule
  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def_readonly("betas", &NoiseSchedule::betas)
      .def_readonly("xi", &NoiseSchedule::xi)
      .def_readonly("xi_bar", &NoiseSchedule::xi_bar);

  m.def(
      "build_schedule",
      [](bool literal_xi) {
        return build_schedule(literal_xi ? ScheduleConvention::kLiteralXi
                                         : ScheduleConvention::kBeta);
      },
      py::arg("literal_xi") = false);

  m.def(
      "corrupt",
      [](const py::array_t<double>& features, int step, std::uint64_t noise_seed,
         bool literal_xi) {
        auto buf = features.unchecked<2>();
        std::vector<double> flat(static_cast<std::size_t>(buf.shape(0) * buf.shape(1)));
        for (py::ssize_t i = 0; i < buf.shape(0); ++i)
          for (py::ssize_t j = 0; j < buf.shape(1); ++j)
            flat[i * buf.shape(1) + j] = buf(i, j);
        const auto schedule = build_schedule(literal_xi ? ScheduleConvention::kLiteralXi
                                                        : ScheduleConvention::kBeta);
        CorruptionSpec spec;
        spec.step = step;
        spec.noise_seed = noise_seed;
        auto out = corrupt(flat, spec, schedule);
        py::array_t<double> result({buf.shape(0), buf.shape(1)});
        auto rbuf = result.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < buf.shape(0); ++i)
          for (py::ssize_t j = 0; j < buf.shape(1); ++j)
            rbuf(i, j) = out[i * buf.shape(1) + j];
        return result;
      },
      py::arg("features"), py::arg("step"), py::arg("noise_seed"),
      py::arg("literal_xi") = false);

  m.def("corrupt_white", [](const py::array_t<double>& features) {
    py::array_t<double> out(std::vector<py::ssize_t>(features.shape(),
                                                     features.shape() + features.ndim()));
    auto* data = out.mutable_data();
    for (py::ssize_t i = 0; i < out.size(); ++i) data[i] = 0.0;
    return out;
  });

  // ----------------------------------------------------------------- rewards
  m.def(
      "anchor_scores",
      [](const py::array_t<double>& clean, const py::array_t<double>& corrupted,
         const std::vector<int>& tokens) {
        return anchor_scores(matrix_tensor(clean), matrix_tensor(corrupted), tokens);
      },
      py::arg("clean_logits"), py::arg("corrupted_logits"), py::arg("response_tokens"));

  m.def(
      "calibrate",
      [](const std::vector<double>& s, const std::string& role, double a) {
        return calibrate(s, role_from_string(role), a);
      },
      py::arg("s"), py::arg("role"), py::arg("a") = 0.5);

  m.def("visual_likelihood_log",
        [](const std::vector<double>& c) { return visual_likelihood_log(c); });

  m.def("log_reward_ratio",
        [](const std::vector<double>& c_theta, const std::vector<double>& c_ref) {
          return log_reward_ratio(c_theta, c_ref);
        });

  // -------------------------------------------------------------- objectives
  m.def(
      "dpo_loss",
      [](const std::vector<double>& lt_w, const std::vector<double>& lr_w,
         const std::vector<double>& lt_l, const std::vector<double>& lr_l, double beta) {
        return dpo_loss(Tensor::vector(lt_w), Tensor::vector(lr_w), Tensor::vector(lt_l),
                        Tensor::vector(lr_l), beta)
            .item();
      },
      py::arg("logp_theta_w"), py::arg("logp_ref_w"), py::arg("logp_theta_l"),
      py::arg("logp_ref_l"), py::arg("beta") = 0.1);

  m.def(
      "tpo_loss",
      [](const std::vector<double>& lt_w, const std::vector<double>& lr_w,
         const std::vector<double>& lt_l, const std::vector<double>& lr_l,
         const std::vector<double>& ct_w, const std::vector<double>& cr_w,
         const std::vector<double>& ct_l, const std::vector<double>& cr_l, double beta,
         double a, const std::string& variant) {
        PairTerms terms;
        terms.logp_theta_w = Tensor::vector(lt_w);
        terms.logp_ref_w = Tensor::vector(lr_w);
        terms.logp_theta_l = Tensor::vector(lt_l);
        terms.logp_ref_l = Tensor::vector(lr_l);
        terms.c_theta_w = Tensor::vector(ct_w);
        terms.c_ref_w = Tensor::vector(cr_w);
        terms.c_theta_l = Tensor::vector(ct_l);
        terms.c_ref_l = Tensor::vector(cr_l);
        auto [loss, breakdown] = tpo_loss(terms, loss_config_from_kwargs(beta, a, variant));
        py::dict d;
        d["loss"] = loss.item();
        d["dpo_margin"] = breakdown.dpo_margin;
        d["calibration_margin"] = breakdown.calibration_margin;
        d["implicit_reward_win"] = breakdown.implicit_reward_win;
        d["implicit_reward_lose"] = breakdown.implicit_reward_lose;
        return d;
      },
      py::arg("logp_theta_w"), py::arg("logp_ref_w"), py::arg("logp_theta_l"),
      py::arg("logp_ref_l"), py::arg("c_theta_w"), py::arg("c_ref_w"), py::arg("c_theta_l"),
      py::arg("c_ref_l"), py::arg("beta") = 0.1, py::arg("a") = 0.5,
      py::arg("variant") = "full");

  m.def(
      "implicit_reward",
      [](const std::vector<double>& lt, const std::vector<double>& lr,
         const std::vector<double>& ct, const std::vector<double>& cr, double beta) {
        return implicit_reward(lt, lr, ct, cr, beta);
      },
      py::arg("logp_theta"), py::arg("logp_ref"), py::arg("c_theta"), py::arg("c_ref"),
      py::arg("beta") = 0.1);

  // ------------------------------------------------------------------- model
  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("vocab_size", &ModelConfig::vocab_size)
      .def_readwrite("patch_count", &ModelConfig::patch_count)
      .def_readwrite("patch_feature_dim", &ModelConfig::patch_feature_dim)
      .def_readwrite("model_dim", &ModelConfig::model_dim)
      .def_readwrite("max_seq_len", &ModelConfig::max_seq_len)
      .def_readwrite("init_seed", &ModelConfig::init_seed);

  py::class_<ToyVlm>(m, "ToyVlm")
      .def_static("init", &ToyVlm::init, py::arg("config"))
      .def_property_readonly("config", &ToyVlm::config)
      .def_property_readonly("frozen", &ToyVlm::frozen)
      .def("clone_frozen", &ToyVlm::clone_frozen)
      .def("param_count", &ToyVlm::param_count)
      .def("param_hash", &ToyVlm::param_hash)
      .def(
          "forward",
          [](const ToyVlm& model, const py::array_t<double>& features,
             const std::vector<int>& tokens, std::size_t prompt_len) {
            const auto flat = flatten_features(features, model.config().patch_count,
                                               model.config().patch_feature_dim);
            NoGradGuard guard;
            ForwardOutput out = forward(model, flat, tokens, prompt_len);
            py::dict d;
            d["logits"] = matrix_array(out.logits);
            d["log_probs"] = matrix_array(out.log_probs);
            d["attention"] = matrix_array(out.attention);
            return d;
          },
          py::arg("patch_features"), py::arg("tokens"), py::arg("prompt_len"))
      .def(
          "greedy_decode",
          [](const ToyVlm& model, const py::array_t<double>& features,
             const std::vector<int>& prompt, std::size_t max_len, int eos_id) {
            const auto flat = flatten_features(features, model.config().patch_count,
                                               model.config().patch_feature_dim);
            return greedy_decode(model, flat, prompt, max_len, eos_id);
          },
          py::arg("patch_features"), py::arg("prompt"), py::arg("max_response_len") = 8,
          py::arg("eos_id") = vocab::kEos);

  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  // ----------------------------------------------------------------- dataset
  m.def("vocab_tokens", [] { return vocab::token_strings(); });

  m.def(
      "generate_data",
      [](const std::string& out_dir, std::size_t count, std::size_t eval_count,
         std::uint64_t seed, int step) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        DatagenOptions options;
        options.corruption_step = step;
        auto train = generate_dataset(count, seed, options);
        write_dataset(train, (fs::path(out_dir) / "train.jsonl").string());
        if (eval_count > 0) {
          auto eval = generate_dataset(eval_count, seed, options, count);
          write_dataset(eval, (fs::path(out_dir) / "eval.jsonl").string());
        }
        write_vocab_file((fs::path(out_dir) / "vocab.json").string());
      },
      py::arg("out_dir"), py::arg("count") = 2000, py::arg("eval_count") = 500,
      py::arg("seed") = 42, py::arg("step") = 500);

  // ---------------------------------------------------------------- training
  m.def(
      "train_pipeline",
      [](const std::string& data_dir, const std::string& variant, double beta, double a,
         int step, int epochs, std::uint64_t seed, bool white_image, bool literal_xi,
         bool differentiable_c, double warmup_lr, double preference_lr,
         std::size_t batch_size, int log_interval) {
        namespace fs = std::filesystem;
        auto train = read_dataset((fs::path(data_dir) / "train.jsonl").string());
        std::vector<PreferencePair> eval;
        const auto eval_path = fs::path(data_dir) / "eval.jsonl";
        if (fs::exists(eval_path)) eval = read_dataset(eval_path.string());

        TrainConfig config;
        config.loss = loss_config_from_kwargs(beta, a, variant);
        config.loss.differentiable_rewards = differentiable_c;
        config.corruption_step = step;
        config.corruption_mode =
            white_image ? CorruptionMode::kWhite : CorruptionMode::kDiffusion;
        config.schedule_convention =
            literal_xi ? ScheduleConvention::kLiteralXi : ScheduleConvention::kBeta;
        config.epochs = epochs;
        config.seed = seed;
        config.warmup_lr = warmup_lr;
        config.preference_lr = preference_lr;
        config.batch_size = batch_size;
        config.log_interval = log_interval;

        ModelConfig mc;
        mc.init_seed = seed;
        ToyVlm policy = ToyVlm::init(mc);
        auto warmup = sft_warmup(policy, train, eval, config);
        auto result = train_preference(policy, train, eval, config);

        py::dict d;
        d["warmup_epochs"] = warmup.epochs_run;
        d["warmup_accuracy"] = warmup.final_heldout_accuracy;
        d["total_steps"] = result.report.total_steps;
        d["final_heldout_margin"] = result.report.final_heldout_margin;
        if (!eval.empty()) {
          auto eval_report = eval_model(policy, result.reference, eval, config.loss);
          d["hallucination_rate"] = eval_report.hallucination_rate;
          d["preference_margin"] = eval_report.preference_margin;
          d["anchored_mean_s"] = eval_report.anchored_mean_s;
          d["other_mean_s"] = eval_report.other_mean_s;
          d["attention_mass"] = eval_report.attention_mass;
        }
        return d;
      },
      py::arg("data_dir"), py::arg("variant") = "full", py::arg("beta") = 0.1,
      py::arg("a") = 0.5, py::arg("step") = 500, py::arg("epochs") = 4, py::arg("seed") = 42,
      py::arg("white_image") = false, py::arg("literal_xi") = false,
      py::arg("differentiable_c") = false, py::arg("warmup_lr") = 0.05,
      py::arg("preference_lr") = 0.005, py::arg("batch_size") = 8,
      py::arg("log_interval") = 10);
}
