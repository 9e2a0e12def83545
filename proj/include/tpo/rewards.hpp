#pragma once

#include <span>
#include <string>
#include <vector>

#include "tpo/tensor.hpp"

namespace tpo {

enum class ResponseRole { kWin, kLose };

std::string to_string(ResponseRole role);

// Per-token visual-anchor scores and calibrated rewards for one response
// under one model. Scores are plain values: they act as coefficients of the
// loss, not as differentiated quantities.
struct TokenRewards {
  std::vector<int> tokens;
  std::vector<double> s;  // anchor scores, logit units
  std::vector<double> c;  // calibrated rewards in (a, a+1)
  ResponseRole role = ResponseRole::kWin;
  double margin_a = 0.5;
};

// s[i] = clean_logits[i, y_i] - corrupted_logits[i, y_i]. Both logit arrays
// must come from the same model on the same tokens, differing only in image
// corruption.
std::vector<double> anchor_scores(const Tensor& clean_logits, const Tensor& corrupted_logits,
                                  std::span<const int> response_tokens);

// c = a + sigmoid(s) for win tokens, a + 1 - sigmoid(s) for lose tokens.
std::vector<double> calibrate(std::span<const double> s, ResponseRole role, double a);

TokenRewards make_token_rewards(std::span<const int> tokens, std::span<const double> s,
                                ResponseRole role, double a);

// log of the cumulative visual likelihood prod_i c_i.
double visual_likelihood_log(std::span<const double> c);

// Elementwise ln(c_theta / c_ref); with a = 0.5 every entry lies strictly
// inside (-ln 3, ln 3).
std::vector<double> log_reward_ratio(std::span<const double> c_theta,
                                     std::span<const double> c_ref);

}  // namespace tpo
