#include "caslu/train/adam.hpp"

#include <cmath>

namespace caslu::train {

namespace {

template <typename T>
void check_like(const nn::ParamSet<T>& params, const nn::ParamSet<T>& other, const char* what) {
  if (other.names() != params.names())
    throw DimensionError(std::string("adam_step: ") + what + " do not list the same parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (other.at(i).shape != params.at(i).shape)
      throw DimensionError(std::string("adam_step: ") + what + " shape mismatch for " + params.names()[i]);
}

}  // namespace

template <typename T>
void adam_step(nn::ParamSet<T>& params, const nn::ParamSet<T>& grads, AdamState<T>& state) {
  check_like(params, grads, "gradients");
  check_like(params, state.m, "first moments");
  check_like(params, state.v, "second moments");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& g = grads.at(i).data;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (!std::isfinite(g[k]))
        throw NumericError("adam_step: non-finite gradient " + std::to_string(static_cast<double>(g[k])) + " in " +
                           grads.names()[i] + "[" + std::to_string(k) + "] at step " + std::to_string(state.t + 1));
  }
  ++state.t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.at(i).data;
    kernels::adam_update(p.size(), p.data(), grads.at(i).data.data(), state.m.at(i).data.data(),
                         state.v.at(i).data.data(), state.hyper, state.t);
  }
}

template void adam_step<float>(nn::ParamSet<float>&, const nn::ParamSet<float>&, AdamState<float>&);
template void adam_step<double>(nn::ParamSet<double>&, const nn::ParamSet<double>&, AdamState<double>&);

}  // namespace caslu::train
