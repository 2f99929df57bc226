#include "ccn/math/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

Shape with_last(const Shape& shape, std::size_t last) {
  Shape out = shape;
  out.back() = last;
  return out;
}

}  // namespace

Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() == 0 || weight.rank() != 2 || bias.rank() != 1 ||
      x.shape().back() != weight.dim(0) || bias.dim(0) != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " vs weight " +
                         shape_string(weight.shape()) + " and bias " +
                         shape_string(bias.shape()));
  }
  Tensor out(with_last(x.shape(), weight.dim(1)));
  auto y = as_matrix(out);
  if (y.rows() > 0) {
    y.noalias() = as_matrix(x) * as_matrix(weight);
    y.rowwise() += as_matrix(bias).row(0);
  }
  return out;
}

Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                       Tensor& weight_grad, Tensor& bias_grad) {
  if (dy.shape() != with_last(x.shape(), weight.dim(1))) {
    throw DimensionError("linear backward: upstream " + shape_string(dy.shape()) +
                         " vs input " + shape_string(x.shape()));
  }
  Tensor dx(x.shape());
  const auto g = as_matrix(dy);
  if (g.rows() > 0) {
    as_matrix(weight_grad).noalias() += as_matrix(x).transpose() * g;
    as_matrix(bias_grad).row(0) += g.colwise().sum();
    as_matrix(dx).noalias() = g * as_matrix(weight).transpose();
  }
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor masked_softmax(const Tensor& logits, const Mask& mask) {
  if (logits.rank() != 2 || mask.rows != logits.dim(0) || mask.cols != logits.dim(1)) {
    throw DimensionError("masked_softmax: logits " + shape_string(logits.shape()) + " vs mask [" +
                         std::to_string(mask.rows) + "x" + std::to_string(mask.cols) + "]");
  }
  const std::size_t rows = logits.dim(0);
  const std::size_t cols = logits.dim(1);
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask(i, j)) max_logit = std::max(max_logit, logits(i, j));
    }
    if (!std::isfinite(max_logit)) continue;  // no valid items
    double total = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      if (mask(i, j)) {
        out(i, j) = std::exp(logits(i, j) - max_logit);
        total += out(i, j);
      }
    }
    for (std::size_t j = 0; j < cols; ++j) out(i, j) /= total;
  }
  return out;
}

Tensor masked_softmax_backward(const Tensor& probs, const Tensor& dprobs) {
  const std::size_t rows = probs.dim(0);
  const std::size_t cols = probs.dim(1);
  Tensor dlogits({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += probs(i, j) * dprobs(i, j);
    for (std::size_t j = 0; j < cols; ++j) dlogits(i, j) = probs(i, j) * (dprobs(i, j) - dot);
  }
  return dlogits;
}

// --- Linear -----------------------------------------------------------------

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : weight_(name + ".weight", Tensor({in, out})), bias_(name + ".bias", Tensor({out})) {
  const double bound = in ? 1.0 / std::sqrt(static_cast<double>(in)) : 0.0;
  for (double& w : weight_.value.data()) w = rng.uniform(-bound, bound);
}

Tensor Linear::forward(const Tensor& x) {
  input_ = x;
  return linear_forward(x, weight_.value, bias_.value);
}

Tensor Linear::backward(const Tensor& dy) {
  return linear_backward(input_, weight_.value, dy, weight_.grad, bias_.grad);
}

// --- BatchNorm --------------------------------------------------------------

BatchNorm::BatchNorm(std::string name, std::size_t features)
    : gamma_(name + ".gamma", Tensor({features}, 1.0)),
      beta_(name + ".beta", Tensor({features})),
      running_mean_{name + ".running_mean", Tensor({features})},
      running_var_{name + ".running_var", Tensor({features}, 1.0)} {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != features()) {
    throw DimensionError("batchnorm " + gamma_.name + ": input " + shape_string(x.shape()) +
                         " vs " + std::to_string(features()) + " features");
  }
  const std::size_t b = x.dim(0);
  const std::size_t n = x.dim(1);
  mode_ = mode;
  normalized_ = Tensor({b, n});
  inv_std_.assign(n, 0.0);
  Tensor out({b, n});
  if (mode == Mode::train) {
    if (b < 2) {
      throw ConfigError("batchnorm " + gamma_.name +
                        ": training needs at least 2 rows, got " + std::to_string(b));
    }
    for (std::size_t k = 0; k < n; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < b; ++i) mean += x(i, k);
      mean /= static_cast<double>(b);
      double var = 0.0;
      for (std::size_t i = 0; i < b; ++i) var += (x(i, k) - mean) * (x(i, k) - mean);
      var /= static_cast<double>(b);
      inv_std_[k] = 1.0 / std::sqrt(var + kEps);
      for (std::size_t i = 0; i < b; ++i) {
        normalized_(i, k) = (x(i, k) - mean) * inv_std_[k];
        out(i, k) = gamma_.value[k] * normalized_(i, k) + beta_.value[k];
      }
      const double unbiased = var * static_cast<double>(b) / static_cast<double>(b - 1);
      running_mean_.value[k] = (1.0 - kMomentum) * running_mean_.value[k] + kMomentum * mean;
      running_var_.value[k] = (1.0 - kMomentum) * running_var_.value[k] + kMomentum * unbiased;
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      inv_std_[k] = 1.0 / std::sqrt(running_var_.value[k] + kEps);
      for (std::size_t i = 0; i < b; ++i) {
        normalized_(i, k) = (x(i, k) - running_mean_.value[k]) * inv_std_[k];
        out(i, k) = gamma_.value[k] * normalized_(i, k) + beta_.value[k];
      }
    }
  }
  return out;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  const std::size_t b = dy.dim(0);
  const std::size_t n = dy.dim(1);
  Tensor dx({b, n});
  for (std::size_t k = 0; k < n; ++k) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      sum_dy += dy(i, k);
      sum_dy_xhat += dy(i, k) * normalized_(i, k);
    }
    gamma_.grad[k] += sum_dy_xhat;
    beta_.grad[k] += sum_dy;
    const double g = gamma_.value[k] * inv_std_[k];
    if (mode_ == Mode::train) {
      const double inv_b = 1.0 / static_cast<double>(b);
      for (std::size_t i = 0; i < b; ++i) {
        dx(i, k) = g * (dy(i, k) - inv_b * sum_dy - normalized_(i, k) * inv_b * sum_dy_xhat);
      }
    } else {
      for (std::size_t i = 0; i < b; ++i) dx(i, k) = g * dy(i, k);
    }
  }
  return dx;
}

// --- Dropout ----------------------------------------------------------------

Dropout::Dropout(double rate) : rate_(0.0) { set_rate(rate); }

void Dropout::set_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  rate_ = rate;
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  if (mode == Mode::eval || rate_ == 0.0) {
    scale_.clear();
    return x;
  }
  const double keep = 1.0 / (1.0 - rate_);
  scale_.resize(x.size());
  Tensor out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale_[i] = rng.bernoulli(rate_) ? 0.0 : keep;
    out[i] *= scale_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& dy) const {
  if (scale_.empty()) return dy;
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= scale_[i];
  return dx;
}

// --- Embedding --------------------------------------------------------------

Embedding::Embedding(std::string name, std::size_t rows, std::size_t width, Rng& rng)
    : table_(name + ".table", Tensor({rows, width})) {
  // Same initialization as a linear layer applied to a one-hot input.
  const double bound = rows ? 1.0 / std::sqrt(static_cast<double>(rows)) : 0.0;
  for (double& w : table_.value.data()) w = rng.uniform(-bound, bound);
}

Tensor Embedding::forward(std::span<const int> ids) {
  ids_.assign(ids.begin(), ids.end());
  return lookup(ids);
}

Tensor Embedding::lookup(std::span<const int> ids) const {
  const std::size_t w = width();
  Tensor out({ids.size(), w});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = static_cast<std::size_t>(ids[i]);
    if (ids[i] < 0 || row >= rows()) {
      throw DimensionError("embedding " + table_.name + ": id " + std::to_string(ids[i]) +
                           " outside table of " + std::to_string(rows()) + " rows");
    }
    std::copy_n(table_.value.data().begin() + static_cast<std::ptrdiff_t>(row * w), w,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  return out;
}

void Embedding::backward(const Tensor& dy) { accumulate(ids_, dy); }

void Embedding::accumulate(std::span<const int> ids, const Tensor& dy) {
  const std::size_t w = width();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto row = static_cast<std::size_t>(ids[i]);
    for (std::size_t k = 0; k < w; ++k) table_.grad[row * w + k] += dy[i * w + k];
  }
}


Tensor concat_last(std::span<const Tensor* const> parts) {
  const Tensor* first = nullptr;
  std::size_t width = 0;
  for (const Tensor* p : parts) {
    if (p->empty()) continue;
    if (!first) {
      first = p;
    } else if (p->rank() != first->rank() ||
               !std::equal(p->shape().begin(), p->shape().end() - 1, first->shape().begin())) {
      throw DimensionError("concat: " + shape_string(first->shape()) + " vs " + shape_string(p->shape()));
    }
    width += p->shape().back();
  }
  if (!first) return {};
  Tensor out(with_last(first->shape(), width));
  const std::size_t rows = out.size() / std::max<std::size_t>(width, 1);
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    if (p->empty()) continue;
    const std::size_t w = p->shape().back();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p->data().begin() + static_cast<std::ptrdiff_t>(r * w), w,
                  out.data().begin() + static_cast<std::ptrdiff_t>(r * width + offset));
    }
    offset += w;
  }
  return out;
}

std::vector<Tensor> split_last(const Tensor& x, std::span<const std::size_t> widths) {
  std::size_t width = 0;
  for (std::size_t w : widths) width += w;
  if (x.rank() == 0 || x.shape().back() != width) {
    throw DimensionError("split: " + shape_string(x.shape()) + " into total width " + std::to_string(width));
  }
  const std::size_t rows = width ? x.size() / width : 0;
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (std::size_t w : widths) {
    Tensor part(with_last(x.shape(), w));
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(r * width + offset), w,
                  part.data().begin() + static_cast<std::ptrdiff_t>(r * w));
    }
    offset += w;
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace ccn
