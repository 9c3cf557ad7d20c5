#ifndef HGMD_GRAD_CHECK_HPP
#define HGMD_GRAD_CHECK_HPP

#include <cstddef>
#include <functional>
#include <span>

#include "hgmd/optim.hpp"

namespace hgmd {

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates checked per parameter; 0 checks all of them. When fewer
  /// than all, an evenly strided subset is used (deterministic).
  std::size_t max_coords_per_param = 0;
  /// |a - n| / max(|a| + |n|, floor); keeps exactly-zero gradients from
  /// dividing by zero.
  double denom_floor = 1e-7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
};

/// Central differences against the analytic gradient. `loss_fn` must zero
/// and fill the `grad` of every listed parameter and return the loss; it
/// must be deterministic (freeze any RNG).
GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace hgmd

#endif  // HGMD_GRAD_CHECK_HPP
