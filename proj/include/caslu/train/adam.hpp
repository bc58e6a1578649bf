#pragma once

#include "caslu/kernels/kernels.hpp"
#include "caslu/nn/params.hpp"

namespace caslu::train {

using kernels::AdamHyper;

template <typename T>
struct AdamState {
  AdamHyper hyper;
  nn::ParamSet<T> m;
  nn::ParamSet<T> v;
  long t = 0;

  static AdamState fresh(const nn::ParamSet<T>& params, AdamHyper hyper = {}) {
    return {hyper, params.zeros_like(), params.zeros_like(), 0};
  }
};

// One bias-corrected Adam update of every tensor. Throws DimensionError when
// grads or moments do not match params, NumericError on a non-finite
// gradient (nothing is modified in either case).
template <typename T>
void adam_step(nn::ParamSet<T>& params, const nn::ParamSet<T>& grads, AdamState<T>& state);

}  // namespace caslu::train
