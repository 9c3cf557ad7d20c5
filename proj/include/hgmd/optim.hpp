#ifndef HGMD_OPTIM_HPP
#define HGMD_OPTIM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hgmd/matrix.hpp"

namespace hgmd {

struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Parameter() = default;
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

/// Moments for one parameter.
struct AdamState {
  DenseMatrix m;
  DenseMatrix v;
  std::uint64_t t = 0;
};

/// Adam with L2-style weight decay folded into the gradient
/// (g += wd * w) before the moment updates.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// One update of every parameter. The parameter list must be the same
  /// (same order, same shapes) on every call. Throws a Numeric error naming
  /// the parameter when a gradient is not finite.
  void step(std::span<Parameter* const> params);

  const AdamConfig& config() const noexcept { return config_; }
  std::span<const AdamState> states() const noexcept { return states_; }

 private:
  AdamConfig config_;
  std::vector<AdamState> states_;
};

}  // namespace hgmd

#endif  // HGMD_OPTIM_HPP
