#include "tpo/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace tpo {

LossVariant loss_variant_from_string(const std::string& s) {
  if (s == "full") return LossVariant::kFull;
  if (s == "dpo") return LossVariant::kDpo;
  if (s == "only-win" || s == "only_win") return LossVariant::kOnlyWin;
  if (s == "only-loss" || s == "only_loss") return LossVariant::kOnlyLoss;
  if (s == "opposite") return LossVariant::kOpposite;
  throw std::invalid_argument("unknown loss variant: " + s);
}

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kFull: return "full";
    case LossVariant::kDpo: return "dpo";
    case LossVariant::kOnlyWin: return "only-win";
    case LossVariant::kOnlyLoss: return "only-loss";
    case LossVariant::kOpposite: return "opposite";
  }
  return "?";
}

namespace {

void check_nonempty(const Tensor& t, const char* what) {
  if (!t.defined() || t.numel() == 0) {
    throw std::invalid_argument(std::string("empty per-token array: ") + what);
  }
}

void check_aligned(const Tensor& a, const Tensor& b, const char* what) {
  if (a.numel() != b.numel()) {
    throw std::invalid_argument(std::string("per-token arrays misaligned: ") + what);
  }
}

void check_positive(const Tensor& c, const char* what) {
  for (double v : c.values()) {
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string("non-positive calibrated reward in ") + what);
    }
  }
}

}  // namespace

Tensor dpo_loss(const Tensor& logp_theta_w, const Tensor& logp_ref_w,
                const Tensor& logp_theta_l, const Tensor& logp_ref_l, double beta) {
  check_nonempty(logp_theta_w, "logp_theta_w");
  check_nonempty(logp_theta_l, "logp_theta_l");
  check_aligned(logp_theta_w, logp_ref_w, "win logp");
  check_aligned(logp_theta_l, logp_ref_l, "lose logp");
  Tensor delta_w = sub(sum(logp_theta_w), sum(logp_ref_w));
  Tensor delta_l = sub(sum(logp_theta_l), sum(logp_ref_l));
  Tensor margin = mul_scalar(sub(delta_w, delta_l), beta);
  return neg(log_sigmoid(margin));
}

std::pair<Tensor, PairLossBreakdown> tpo_loss(const PairTerms& terms,
                                              const LossConfig& config) {
  check_nonempty(terms.logp_theta_w, "logp_theta_w");
  check_nonempty(terms.logp_theta_l, "logp_theta_l");
  check_aligned(terms.logp_theta_w, terms.logp_ref_w, "win logp");
  check_aligned(terms.logp_theta_l, terms.logp_ref_l, "lose logp");

  Tensor delta_w = sub(sum(terms.logp_theta_w), sum(terms.logp_ref_w));
  Tensor delta_l = sub(sum(terms.logp_theta_l), sum(terms.logp_ref_l));
  Tensor dpo_margin = mul_scalar(sub(delta_w, delta_l), config.beta);

  const bool use_win = config.variant != LossVariant::kDpo &&
                       config.variant != LossVariant::kOnlyLoss;
  const bool use_lose = config.variant != LossVariant::kDpo &&
                        config.variant != LossVariant::kOnlyWin;

  auto variant_c = [&](const Tensor& c) {
    if (config.variant == LossVariant::kOpposite) {
      // Swapping the win/lose formulas equals reflecting c about a + 1/2.
      return add_scalar(neg(c), 2.0 * config.margin_a + 1.0);
    }
    return c;
  };
  auto log_c_gap = [&](const Tensor& c_theta, const Tensor& c_ref) {
    check_aligned(c_theta, c_ref, "calibrated rewards");
    Tensor ct = variant_c(c_theta);
    Tensor cr = variant_c(c_ref);
    check_positive(ct, "c_theta");
    check_positive(cr, "c_ref");
    return sub(sum(log(ct)), sum(log(cr)));
  };

  Tensor calib_w, calib_l;
  if (use_win) {
    check_aligned(terms.c_theta_w, terms.logp_theta_w, "win rewards vs tokens");
    calib_w = log_c_gap(terms.c_theta_w, terms.c_ref_w);
  }
  if (use_lose) {
    check_aligned(terms.c_theta_l, terms.logp_theta_l, "lose rewards vs tokens");
    calib_l = log_c_gap(terms.c_theta_l, terms.c_ref_l);
  }

  Tensor calib_margin = Tensor::scalar(0.0);
  if (use_win && use_lose) {
    calib_margin = mul_scalar(sub(calib_w, calib_l), config.beta);
  } else if (use_win) {
    calib_margin = mul_scalar(calib_w, config.beta);
  } else if (use_lose) {
    calib_margin = mul_scalar(neg(calib_l), config.beta);
  }

  Tensor margin = add(dpo_margin, calib_margin);
  Tensor loss = neg(log_sigmoid(margin));

  PairLossBreakdown breakdown;
  breakdown.dpo_margin = dpo_margin.item();
  breakdown.calibration_margin = calib_margin.item();
  breakdown.total = loss.item();
  // Per-sequence rewards under the active variant; win - lose reproduces the
  // sigmoid argument exactly.
  breakdown.implicit_reward_win =
      config.beta * (delta_w.item() + (use_win ? calib_w.item() : 0.0));
  breakdown.implicit_reward_lose =
      config.beta * (delta_l.item() + (use_lose ? calib_l.item() : 0.0));
  return {loss, breakdown};
}

double implicit_reward(std::span<const double> logp_theta, std::span<const double> logp_ref,
                       std::span<const double> c_theta, std::span<const double> c_ref,
                       double beta) {
  if (logp_theta.size() != logp_ref.size() || logp_theta.size() != c_theta.size() ||
      c_theta.size() != c_ref.size()) {
    throw std::invalid_argument("implicit_reward: per-token arrays misaligned");
  }
  if (logp_theta.empty()) throw std::invalid_argument("implicit_reward: empty response");
  double acc = 0.0;
  for (std::size_t i = 0; i < logp_theta.size(); ++i) {
    if (!(c_theta[i] > 0.0) || !(c_ref[i] > 0.0)) {
      throw std::invalid_argument("implicit_reward requires positive rewards");
    }
    acc += logp_theta[i] - logp_ref[i] + std::log(c_theta[i] / c_ref[i]);
  }
  return beta * acc;
}

}  // namespace tpo
