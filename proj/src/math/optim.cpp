#include "ccn/math/optim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccn/errors.hpp"

namespace ccn {

double bce_loss(double p, double y) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return -y * std::log(q) - (1.0 - y) * std::log(1.0 - q);
}

double bce_grad(double p, double y) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return (q - y) / (q * (1.0 - q));
}

void adam_step(Parameter& param, double lr, const AdamConfig& config) {
  ++param.step_count;
  const auto t = static_cast<double>(param.step_count);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto value = param.value.data();
  auto grad = param.grad.data();
  auto m = param.adam_m.data();
  auto v = param.adam_v.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    value[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
  }
}

double cyclical_lr(std::uint64_t step, double max_lr, double base_lr, std::uint64_t half_cycle) {
  if (half_cycle == 0) throw ConfigError("cyclical_lr: half_cycle must be >= 1");
  const std::uint64_t pos = step % (2 * half_cycle);
  const double frac = pos <= half_cycle
                          ? static_cast<double>(pos) / static_cast<double>(half_cycle)
                          : static_cast<double>(2 * half_cycle - pos) /
                                static_cast<double>(half_cycle);
  return base_lr + (max_lr - base_lr) * frac;
}

GradcheckReport gradcheck(const Objective& objective, std::span<Parameter* const> params,
                          double h, std::size_t max_coords) {
  const double base = objective(true);
  if (!std::isfinite(base)) throw NumericError("gradcheck: objective is not finite");

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradcheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    const std::size_t n = p.value.size();
    const std::size_t count = (max_coords == 0 || max_coords >= n) ? n : max_coords;
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t i = count == n ? c : (c * n) / count;
      const double saved = p.value[i];
      p.value[i] = saved + h;
      const double plus = objective(false);
      p.value[i] = saved - h;
      const double minus = objective(false);
      p.value[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("gradcheck: non-finite objective while perturbing " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[pi][i];
      if (!std::isfinite(a)) {
        throw NumericError("gradcheck: non-finite analytic gradient for " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.coordinates;
      if (err > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = err;
        report.worst_parameter = p.name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace ccn
