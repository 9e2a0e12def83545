#pragma once

#include <span>
#include <string>
#include <utility>

#include "tpo/tensor.hpp"

namespace tpo {

enum class LossVariant { kFull, kDpo, kOnlyWin, kOnlyLoss, kOpposite };

LossVariant loss_variant_from_string(const std::string& s);
std::string to_string(LossVariant v);

struct LossConfig {
  double beta = 0.1;
  double margin_a = 0.5;
  LossVariant variant = LossVariant::kFull;
  // When set, the trainer lets gradients flow through the calibrated
  // rewards into both forward passes instead of treating them as
  // per-step constants.
  bool differentiable_rewards = false;
};

struct PairLossBreakdown {
  double dpo_margin = 0.0;          // beta * (win logp gap - lose logp gap)
  double calibration_margin = 0.0;  // beta * (win log-c gap - lose log-c gap)
  double total = 0.0;               // -ln sigma(dpo_margin + calibration_margin)
  double implicit_reward_win = 0.0;
  double implicit_reward_lose = 0.0;
};

// loss = -ln sigma(beta * [sum(logp_theta_w - logp_ref_w)
//                          - sum(logp_theta_l - logp_ref_l)])
Tensor dpo_loss(const Tensor& logp_theta_w, const Tensor& logp_ref_w,
                const Tensor& logp_theta_l, const Tensor& logp_ref_l, double beta);

// Per-token terms for one preference pair. logp tensors are 1-D aligned to
// response tokens; c tensors hold calibrated rewards under the standard
// win/lose formulas (constants unless the differentiable path is active).
struct PairTerms {
  Tensor logp_theta_w, logp_ref_w, logp_theta_l, logp_ref_l;
  Tensor c_theta_w, c_ref_w, c_theta_l, c_ref_l;
};

// TPO objective: the DPO margin plus the calibration margin inside one
// sigmoid. Variants: dpo drops both calibration terms, only_win keeps the
// win side, only_loss the lose side, opposite swaps the win/lose calibration
// formulas (realized as c -> 2a + 1 - c via the complementarity identity).
std::pair<Tensor, PairLossBreakdown> tpo_loss(const PairTerms& terms, const LossConfig& config);

// beta * sum_i [logp_theta_i - logp_ref_i + ln(c_theta_i / c_ref_i)];
// defined up to the additive partition term, which cancels pairwise.
double implicit_reward(std::span<const double> logp_theta, std::span<const double> logp_ref,
                       std::span<const double> c_theta, std::span<const double> c_ref,
                       double beta);

}  // namespace tpo
