#include "hgmd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hgmd {

GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  loss_fn();
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto w = params[k]->value.values();
    const std::size_t n = w.size();
    const std::size_t count =
        options.max_coords_per_param == 0 ? n : std::min(n, options.max_coords_per_param);
    if (count == 0) continue;
    const std::size_t stride = std::max<std::size_t>(1, n / count);
    for (std::size_t c = 0, idx = 0; c < count && idx < n; ++c, idx += stride) {
      const double saved = w[idx];
      w[idx] = saved + options.step;
      const double up = loss_fn();
      w[idx] = saved - options.step;
      const double down = loss_fn();
      w[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k].values()[idx];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max(std::abs(a) + std::abs(numeric), options.denom_floor);
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      result.max_rel_error = std::max(result.max_rel_error, rel_err);
      ++result.coords_checked;
    }
  }
  // Leave the analytic gradients in place for the caller.
  loss_fn();
  return result;
}

}  // namespace hgmd
