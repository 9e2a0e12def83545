#include "tpo/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace tpo {

std::string to_string(ResponseRole role) { return role == ResponseRole::kWin ? "win" : "lose"; }

std::vector<double> anchor_scores(const Tensor& clean_logits, const Tensor& corrupted_logits,
                                  std::span<const int> response_tokens) {
  if (clean_logits.shape() != corrupted_logits.shape()) {
    throw std::invalid_argument("anchor_scores: logit shapes differ, " +
                                shape_str(clean_logits.shape()) + " vs " +
                                shape_str(corrupted_logits.shape()));
  }
  if (clean_logits.rank() != 2 || clean_logits.shape()[0] != response_tokens.size()) {
    throw std::invalid_argument("anchor_scores: logits not aligned to response tokens");
  }
  const std::size_t v = clean_logits.shape()[1];
  std::vector<double> s(response_tokens.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int y = response_tokens[i];
    if (y < 0 || static_cast<std::size_t>(y) >= v) {
      throw std::invalid_argument("anchor_scores: token id " + std::to_string(y) +
                                  " out of range");
    }
    s[i] = clean_logits.at(i, y) - corrupted_logits.at(i, y);
  }
  return s;
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<double> calibrate(std::span<const double> s, ResponseRole role, double a) {
  if (a < 0) throw std::invalid_argument("margin a must be non-negative");
  std::vector<double> c(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double sig = stable_sigmoid(s[i]);
    c[i] = (role == ResponseRole::kWin) ? a + sig : a + 1.0 - sig;
  }
  return c;
}

TokenRewards make_token_rewards(std::span<const int> tokens, std::span<const double> s,
                                ResponseRole role, double a) {
  if (tokens.size() != s.size()) {
    throw std::invalid_argument("token/score length mismatch");
  }
  TokenRewards r;
  r.tokens.assign(tokens.begin(), tokens.end());
  r.s.assign(s.begin(), s.end());
  r.c = calibrate(s, role, a);
  r.role = role;
  r.margin_a = a;
  return r;
}

double visual_likelihood_log(std::span<const double> c) {
  double acc = 0.0;
  for (double v : c) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("visual likelihood requires positive rewards, got " +
                                  std::to_string(v));
    }
    acc += std::log(v);
  }
  return acc;
}

std::vector<double> log_reward_ratio(std::span<const double> c_theta,
                                     std::span<const double> c_ref) {
  if (c_theta.size() != c_ref.size()) {
    throw std::invalid_argument("log_reward_ratio: lengths differ, " +
                                std::to_string(c_theta.size()) + " vs " +
                                std::to_string(c_ref.size()));
  }
  std::vector<double> out(c_theta.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(c_theta[i] > 0.0) || !(c_ref[i] > 0.0)) {
      throw std::invalid_argument("log_reward_ratio requires positive rewards");
    }
    out[i] = std::log(c_theta[i] / c_ref[i]);
  }
  return out;
}

}  // namespace tpo
