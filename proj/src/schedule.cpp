#include "tpo/schedule.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "tpo/rng.hpp"

namespace tpo {

NoiseSchedule build_schedule(ScheduleConvention convention) {
  NoiseSchedule s;
  s.convention = convention;
  s.betas.resize(kScheduleSteps);
  s.xi.resize(kScheduleSteps);
  s.xi_bar.resize(kScheduleSteps);
  const double lo = -6.0, hi = 6.0;
  double log_acc = 0.0;  // products in log space
  for (int i = 0; i < kScheduleSteps; ++i) {
    const double l = lo + (hi - lo) * static_cast<double>(i) / (kScheduleSteps - 1);
    const double sig = 1.0 / (1.0 + std::exp(-l));
    const double b = sig * (0.5e-2 - 1e-5) + 1e-5;
    s.betas[i] = b;
    s.xi[i] = (convention == ScheduleConvention::kBeta) ? 1.0 - b : b;
    log_acc += std::log(s.xi[i]);
    s.xi_bar[i] = std::exp(log_acc);
  }
  return s;
}

std::string schedule_csv(const NoiseSchedule& schedule) {
  std::ostringstream out;
  out.precision(17);
  out << "i,beta,xi,xi_bar\n";
  for (int i = 0; i < kScheduleSteps; ++i) {
    out << i << ',' << schedule.betas[i] << ',' << schedule.xi[i] << ','
        << schedule.xi_bar[i] << '\n';
  }
  return out.str();
}

CorruptionMode corruption_mode_from_string(const std::string& s) {
  if (s == "diffusion") return CorruptionMode::kDiffusion;
  if (s == "white") return CorruptionMode::kWhite;
  throw std::invalid_argument("unknown corruption mode: " + s);
}

std::string to_string(CorruptionMode mode) {
  return mode == CorruptionMode::kDiffusion ? "diffusion" : "white";
}

std::vector<double> corrupt_with_signal_fraction(const std::vector<double>& patch_features,
                                                 double xi_bar, std::uint64_t noise_seed) {
  const double signal = std::sqrt(xi_bar);
  const double noise = std::sqrt(1.0 - xi_bar);
  Rng rng(noise_seed);
  std::vector<double> out(patch_features.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = signal * patch_features[i] + noise * rng.gaussian();
  }
  return out;
}

std::vector<double> corrupt(const std::vector<double>& patch_features,
                            const CorruptionSpec& spec, const NoiseSchedule& schedule) {
  if (spec.mode == CorruptionMode::kWhite) return corrupt_white(patch_features);
  if (spec.step < 0 || spec.step >= kScheduleSteps) {
    throw std::invalid_argument("corruption step " + std::to_string(spec.step) +
                                " outside [0, " + std::to_string(kScheduleSteps - 1) + "]");
  }
  return corrupt_with_signal_fraction(patch_features, schedule.xi_bar[spec.step],
                                      spec.noise_seed);
}

std::vector<double> corrupt_white(const std::vector<double>& patch_features) {
  return std::vector<double>(patch_features.size(), 0.0);
}

}  // namespace tpo
