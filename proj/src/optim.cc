#include "tembed/optim.h"

#include <cmath>

#include "tembed/errors.h"

namespace tembed {

OptState OptState::zeros_like(const ParamSet& params, OptHyper hyper) {
  OptState s;
  s.hyper = hyper;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.v_max = params.zeros_like();
  return s;
}

void opt_step(ParamSet& params, const ParamSet& grads, OptState& state) {
  if (!params.same_layout(grads) || !params.same_layout(state.m)) {
    throw InputError("optimizer: parameter/gradient/state shapes differ");
  }
  for (const auto& g : grads) {
    if (!g.value.allFinite()) {
      throw NumericError("optimizer: non-finite gradient in " + g.name);
    }
  }
  const auto& hp = state.hyper;
  const long long t = ++state.t;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  const double step = hp.lr / bc1;
  const double decay = 1.0 - hp.lr * hp.weight_decay;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);
  for (size_t k = 0; k < params.size(); ++k) {
    auto theta = params.at(k).value.array();
    const auto g = grads.at(k).value.array();
    auto m = state.m.at(k).value.array();
    auto v = state.v.at(k).value.array();
    auto vmax = state.v_max.at(k).value.array();
    theta *= decay;
    m = hp.beta1 * m + (1.0 - hp.beta1) * g;
    v = hp.beta2 * v + (1.0 - hp.beta2) * g.square();
    vmax = vmax.max(v);
    theta -= step * m / (vmax.sqrt() * inv_sqrt_bc2 + hp.eps);
  }
}

}  // namespace tembed
