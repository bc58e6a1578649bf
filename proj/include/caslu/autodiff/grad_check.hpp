#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "caslu/autodiff/tensor.hpp"

namespace caslu::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_param;  // max relative error of each parameter
  // Split diagnostics: relative error over coordinates with |a| + |n| at
  // least kConditionedMagnitude, absolute error over the rest. Central
  // differences at eps = 1e-5 carry about 1e-11 of round-off for O(1)
  // objectives, so relative error on smaller entries measures noise.
  double max_rel_error_conditioned = 0.0;
  double max_abs_error_small = 0.0;
  std::size_t small_coordinates = 0;
};

inline constexpr double kConditionedMagnitude = 1e-6;

// Relative error used throughout: |a - n| / max(1e-8, |a| + |n|).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Scalar objective over a list of parameter tensors. When `grads` is non-null
// the function must also fill it with the analytic gradient (same shapes).
using Objective = std::function<double(const std::vector<Tensor<double>>& params, std::vector<Tensor<double>>* grads)>;

// Central-difference check of every coordinate of every parameter.
// Throws NumericError if the objective is non-finite at a perturbed point.
GradCheckResult grad_check(const Objective& f, std::vector<Tensor<double>> params, double eps = 1e-5);

}  // namespace caslu::ad
