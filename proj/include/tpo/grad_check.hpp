#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tpo/tensor.hpp"

namespace tpo {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double analytic_norm = 0.0;  // over the sampled coordinates
  double numeric_norm = 0.0;
};

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h at seeded random coordinates of each parameter.
// loss_builder must deterministically rebuild the scalar loss from the
// current parameter values. Relative error per coordinate is
// |g_a - g_n| / max(1e-12, |g_a| + |g_n|).
std::vector<GradCheckReport> grad_check(
    const std::function<Tensor()>& loss_builder,
    const std::vector<std::pair<std::string, Tensor>>& params,
    std::size_t samples_per_param, double h, std::uint64_t seed);

double max_rel_err(const std::vector<GradCheckReport>& reports);

}  // namespace tpo
