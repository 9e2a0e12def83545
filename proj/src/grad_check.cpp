#include "tpo/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tpo/rng.hpp"

namespace tpo {

std::vector<GradCheckReport> grad_check(
    const std::function<Tensor()>& loss_builder,
    const std::vector<std::pair<std::string, Tensor>>& params,
    std::size_t samples_per_param, double h, std::uint64_t seed) {
  auto eval_loss = [&]() {
    Tensor loss = loss_builder();
    const double v = loss.item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
    return v;
  };

  // One analytic pass; parameters keep their gradients until we are done.
  for (auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = loss_builder();
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite loss");
  backward(loss);

  Rng rng(seed);
  std::vector<GradCheckReport> reports;
  reports.reserve(params.size());
  for (auto& [name, param] : params) {
    Tensor p = param;
    GradCheckReport rep;
    rep.name = name;
    const std::size_t n = p.numel();
    const std::size_t samples = std::min(samples_per_param, n);
    double a2 = 0.0, n2 = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      const std::size_t i =
          (samples == n) ? s : static_cast<std::size_t>(rng.below(n));
      const double saved = p.values()[i];
      p.data()[i] = saved + h;
      const double fp = eval_loss();
      p.data()[i] = saved - h;
      const double fm = eval_loss();
      p.data()[i] = saved;
      const double g_num = (fp - fm) / (2.0 * h);
      const double g_ana = p.grad()[i];
      const double err =
          std::abs(g_ana - g_num) / std::max(1e-12, std::abs(g_ana) + std::abs(g_num));
      rep.max_rel_err = std::max(rep.max_rel_err, err);
      a2 += g_ana * g_ana;
      n2 += g_num * g_num;
    }
    rep.analytic_norm = std::sqrt(a2);
    rep.numeric_norm = std::sqrt(n2);
    reports.push_back(std::move(rep));
  }
  return reports;
}

double max_rel_err(const std::vector<GradCheckReport>& reports) {
  double m = 0.0;
  for (const auto& r : reports) m = std::max(m, r.max_rel_err);
  return m;
}

}  // namespace tpo
