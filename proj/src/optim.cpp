#include "hgmd/optim.hpp"

#include <cmath>

#include "hgmd/error.hpp"

namespace hgmd {

void Adam::step(std::span<Parameter* const> params) {
  if (states_.empty()) {
    states_.reserve(params.size());
    for (const Parameter* p : params) {
      states_.push_back({DenseMatrix(p->value.rows(), p->value.cols()),
                         DenseMatrix(p->value.rows(), p->value.cols()), 0});
    }
  }
  if (states_.size() != params.size()) throw_invalid("adam: parameter list changed between steps");

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    AdamState& s = states_[k];
    if (!s.m.same_shape(p.value) || !p.grad.same_shape(p.value)) {
      throw_invalid("adam: shape mismatch for parameter " + p.name);
    }
    if (!p.grad.all_finite()) throw_numeric("non-finite gradient in parameter " + p.name);

    ++s.t;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(s.t));
    auto w = p.value.values();
    const auto g = p.grad.values();
    auto m = s.m.values();
    auto v = s.v.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + config_.weight_decay * w[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace hgmd
