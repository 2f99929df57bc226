#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccn/math/optim.hpp"

namespace ccn {

struct GradientCheck {
  std::string name;
  std::uint64_t seed = 0;
  GradcheckReport report;
};

// Central-difference checks of every trainable layer and of the full model
// variants (fusion modes, memory layouts, text encoders, baselines) on a tiny
// generated dataset in training mode with dropout off.
std::vector<GradientCheck> run_gradient_suite(const std::vector<std::uint64_t>& seeds, double h = 1e-5);

}  // namespace ccn
