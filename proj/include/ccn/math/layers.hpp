#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccn/math/parameter.hpp"
#include "ccn/math/rng.hpp"
#include "ccn/math/tensor.hpp"

namespace ccn {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Stateless kernels. Every forward has a matching backward that returns the
// input gradient and accumulates (+=) parameter gradients.
// ---------------------------------------------------------------------------

// out = x W + bias for x [n x in], W [in x out], bias [out]. Any leading axes
// of x are folded into n; the output keeps them.
Tensor linear_forward(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Returns dx; adds dW and dbias into the given gradient tensors.
Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                       Tensor& weight_grad, Tensor& bias_grad);

Tensor relu(const Tensor& x);
// Subgradient at 0 is 0. `y` may be the input or the output of relu.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

double sigmoid(double x);

// Softmax over the valid positions of each row of a b x J tensor. Masked
// positions are exactly 0; rows with no valid position are all 0.
Tensor masked_softmax(const Tensor& logits, const Mask& mask);
Tensor masked_softmax_backward(const Tensor& probs, const Tensor& dprobs);

// ---------------------------------------------------------------------------
// Layers that own parameters and cache what their backward pass needs.
// ---------------------------------------------------------------------------

/// Fully connected layer. Weights are drawn from U(-1/sqrt(in), 1/sqrt(in));
/// the bias starts at zero.
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::size_t in_features() const { return weight_.value.dim(0); }
  std::size_t out_features() const { return weight_.value.dim(1); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  void collect(ParameterList& out) { out.push_back(&weight_); out.push_back(&bias_); }

 private:
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
};

/// Per-feature batch normalization over the rows of a b x n tensor.
///
/// Training normalizes with the biased batch variance and updates the running
/// statistics with the unbiased one, so a batch of one row is rejected.
class BatchNorm {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  BatchNorm(std::string name, std::size_t features);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  std::size_t features() const { return gamma_.value.size(); }
  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  Buffer& running_mean() { return running_mean_; }
  Buffer& running_var() { return running_var_; }
  void collect(ParameterList& out) { out.push_back(&gamma_); out.push_back(&beta_); }
  void collect(BufferList& out) { out.push_back(&running_mean_); out.push_back(&running_var_); }

 private:
  Parameter gamma_;
  Parameter beta_;
  Buffer running_mean_;
  Buffer running_var_;
  Mode mode_ = Mode::eval;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) in training.
class Dropout {
 public:
  explicit Dropout(double rate = 0.0);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  Tensor backward(const Tensor& dy) const;

  double rate() const { return rate_; }
  void set_rate(double rate);

 private:
  double rate_;
  // Empty when the last forward was an identity.
  std::vector<double> scale_;
};

/// Row lookup into a learned table; equivalent to a bias-free linear map of a
/// one-hot vector.
class Embedding {
 public:
  Embedding() = default;
  Embedding(std::string name, std::size_t rows, std::size_t width, Rng& rng);

  // Returns [ids.size() x width].
  Tensor forward(std::span<const int> ids);
  void backward(const Tensor& dy);
  // Stateless form for tables shared by several lookups.
  Tensor lookup(std::span<const int> ids) const;
  void accumulate(std::span<const int> ids, const Tensor& dy);

  std::size_t rows() const { return table_.value.dim(0); }
  std::size_t width() const { return table_.value.dim(1); }
  Parameter& table() { return table_; }
  void collect(ParameterList& out) { out.push_back(&table_); }

 private:
  Parameter table_;
  std::vector<int> ids_;
};

// Concatenates tensors along their last axis; every leading axis must agree.
// Empty (default-constructed) inputs are skipped.
Tensor concat_last(std::span<const Tensor* const> parts);
// Inverse of concat_last for the given widths.
std::vector<Tensor> split_last(const Tensor& x, std::span<const std::size_t> widths);

}  // namespace ccn
