#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "caslu/autodiff/grad_check.hpp"
#include "caslu/model/model.hpp"

namespace caslu::model {

struct VariantGradCheckOptions {
  double eps = 1e-5;
  std::uint64_t seed = 1;
  bool planted_bug = false;  // corrupts one backward rule for the duration of the check
};

struct VariantGradCheck {
  Variant variant = Variant::caslu;
  ad::GradCheckResult result;
  // Max relative error per parameter group ("text.encoder", "attention.k_text", ...).
  std::vector<std::pair<std::string, double>> groups;
};

// The small 64-bit model the checks run on: vocabularies 12/10, 3 classes,
// width 4, hidden 3, maximum lengths 6/9, init range 1.0.
ModelConfig gradcheck_config(Variant v);

// Finite-difference check of a 2-example batch loss for `v` with random
// attention kernels. VAT uses the fully differentiable KL term.
VariantGradCheck gradcheck_variant(Variant v, const VariantGradCheckOptions& options = {});

}  // namespace caslu::model
