#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ccn/math/tensor.hpp"

namespace ccn {

/// A trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string param_name, Tensor init);

  void zero_grad() { grad.fill(0.0); }
  // Clears the optimizer moments and step counter.
  void reset_optimizer();
};

/// Non-trainable state saved with a model, such as batch-norm running stats.
struct Buffer {
  std::string name;
  Tensor value;
};

using ParameterList = std::vector<Parameter*>;
using BufferList = std::vector<Buffer*>;

double grad_norm(const ParameterList& params);

}  // namespace ccn
