#include "ccn/math/parameter.hpp"

#include <cmath>

#include "ccn/math/rng.hpp"

namespace ccn {

Parameter::Parameter(std::string param_name, Tensor init)
    : name(std::move(param_name)),
      value(std::move(init)),
      grad(value.shape()),
      adam_m(value.shape()),
      adam_v(value.shape()) {}

void Parameter::reset_optimizer() {
  adam_m.fill(0.0);
  adam_v.fill(0.0);
  step_count = 0;
}

double grad_norm(const ParameterList& params) {
  double sum = 0.0;
  for (const Parameter* p : params) {
    for (double g : p->grad.data()) sum += g * g;
  }
  return std::sqrt(sum);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::size_t Rng::index(std::size_t n) {
  if (n <= 1) return 0;
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = 0;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Rng Rng::fork(std::uint64_t salt) {
  std::uint64_t z = next_u64() ^ (salt * 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

}  // namespace ccn
