#include "caslu/autodiff/grad_check.hpp"

#include "caslu/util/error.hpp"

namespace caslu::ad {

GradCheckResult grad_check(const Objective& f, std::vector<Tensor<double>> params, double eps) {
  for (const auto& p : params)
    for (double v : p.data)
      if (!std::isfinite(v)) throw NumericError("grad_check: non-finite parameter value");

  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.emplace_back(p.shape);
  f(params, &analytic);

  GradCheckResult result;
  result.per_param.assign(params.size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      const double saved = params[k].data[i];
      params[k].data[i] = saved + eps;
      const double up = f(params, nullptr);
      params[k].data[i] = saved - eps;
      const double down = f(params, nullptr);
      params[k].data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down))
        throw NumericError("grad_check: objective is non-finite at a perturbed point");
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k].data[i];
      const double err = relative_error(a, numeric);
      result.per_param[k] = std::max(result.per_param[k], err);
      if (std::abs(a) + std::abs(numeric) >= kConditionedMagnitude) {
        result.max_rel_error_conditioned = std::max(result.max_rel_error_conditioned, err);
      } else {
        result.max_abs_error_small = std::max(result.max_abs_error_small, std::abs(a - numeric));
        ++result.small_coordinates;
      }
    }
    result.max_rel_error = std::max(result.max_rel_error, result.per_param[k]);
  }
  return result;
}

}  // namespace caslu::ad
