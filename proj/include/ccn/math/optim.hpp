#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "ccn/math/parameter.hpp"

namespace ccn {

// --- Loss -------------------------------------------------------------------

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy on a probability clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, double y);
// dL/dp evaluated at the clamped probability.
double bce_grad(double p, double y);

// --- Adam -------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of `param.value` from `param.grad`. The
// gradient is left untouched; callers zero it before the next accumulation.
void adam_step(Parameter& param, double lr, const AdamConfig& config = {});

// --- Learning-rate schedule -------------------------------------------------

// Triangular cyclical schedule: rises linearly from base_lr to max_lr over
// half_cycle steps, falls back over the next half_cycle, and repeats.
double cyclical_lr(std::uint64_t step, double max_lr, double base_lr, std::uint64_t half_cycle);

// --- Finite-difference verification -----------------------------------------

// Evaluates the scalar objective. When `with_grad` is set it must also zero
// and then populate the gradients of every checked parameter.
using Objective = std::function<double(bool with_grad)>;

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central differences (f(x+h) - f(x-h)) / 2h against the analytic gradient.
// The error per coordinate is |a - n| / max(1, |a|, |n|). A positive
// `max_coords` samples that many evenly spaced coordinates per parameter.
GradcheckReport gradcheck(const Objective& objective, std::span<Parameter* const> params,
                          double h = 1e-5, std::size_t max_coords = 0);

}  // namespace ccn
