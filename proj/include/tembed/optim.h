#pragma once

#include <vector>

#include "tembed/params.h"

namespace tembed {

struct OptHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// AdamW with the amsgrad running maximum. Per step t (starting at 1):
//   theta <- theta * (1 - lr * wd)                       (decoupled decay)
//   m <- b1 m + (1 - b1) g ;  v <- b2 v + (1 - b2) g^2 ;  vmax <- max(vmax, v)
//   theta <- theta - lr / (1 - b1^t) * m / (sqrt(vmax / (1 - b2^t)) + eps)
struct OptState {
  OptHyper hyper;
  ParamSet m;
  ParamSet v;
  ParamSet v_max;
  long long t = 0;

  static OptState zeros_like(const ParamSet& params, OptHyper hyper);
};

// Throws NumericError, leaving params and state untouched, if any gradient
// is non-finite.
void opt_step(ParamSet& params, const ParamSet& grads, OptState& state);

}  // namespace tembed
