#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tpo {

inline constexpr int kScheduleSteps = 1000;

// How the per-step formula value sigmoid(l) * (0.5e-2 - 1e-5) + 1e-5 maps
// onto the schedule. kBeta treats it as the per-step noise fraction
// (signal fraction xi = 1 - beta); kLiteralXi keeps it as xi directly, in
// which case the cumulative products collapse toward zero within a few steps
// (kept for comparison).
enum class ScheduleConvention { kBeta, kLiteralXi };

struct NoiseSchedule {
  std::vector<double> betas;   // per-step formula values
  std::vector<double> xi;      // per-step signal fractions
  std::vector<double> xi_bar;  // cumulative products of xi
  ScheduleConvention convention = ScheduleConvention::kBeta;
};

NoiseSchedule build_schedule(ScheduleConvention convention = ScheduleConvention::kBeta);

// CSV export with columns (i, beta, xi, xi_bar), for cross-checking against
// an external oracle.
std::string schedule_csv(const NoiseSchedule& schedule);

enum class CorruptionMode { kDiffusion, kWhite };

struct CorruptionSpec {
  CorruptionMode mode = CorruptionMode::kDiffusion;
  int step = 500;                  // diffusion mode only
  std::uint64_t noise_seed = 0;    // fixes the Gaussian draw per pair

  bool operator==(const CorruptionSpec&) const = default;
};

CorruptionMode corruption_mode_from_string(const std::string& s);
std::string to_string(CorruptionMode mode);

// v_c = sqrt(xi_bar_k) * v + sqrt(1 - xi_bar_k) * eps with eps drawn from
// the seeded generator. Input is untouched; same inputs give bit-identical
// output.
std::vector<double> corrupt(const std::vector<double>& patch_features,
                            const CorruptionSpec& spec, const NoiseSchedule& schedule);

// Same interpolation with an explicit signal fraction; the zero- and
// pure-noise limits of the formula are reachable only through this entry.
std::vector<double> corrupt_with_signal_fraction(const std::vector<double>& patch_features,
                                                 double xi_bar, std::uint64_t noise_seed);

// All-zero features of identical shape: the embedding-space analog of a
// blank image.
std::vector<double> corrupt_white(const std::vector<double>& patch_features);

}  // namespace tpo
