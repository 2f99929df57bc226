#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccn/math/parameter.hpp"
#include "ccn/math/rng.hpp"
#include "ccn/math/tensor.hpp"

namespace ccn {

/// Single-layer unidirectional LSTM that summarizes a token sequence as
/// concat(h_T, mean_t h_t), a vector of width 2 * hidden.
///
/// Gate blocks in the packed weights are ordered input, forget, cell
/// candidate, output. The initial hidden and cell states are zero.
class LstmEncoder {
 public:
  LstmEncoder() = default;
  LstmEncoder(std::string name, std::size_t input_width, std::size_t hidden, Rng& rng);

  std::size_t input_width() const { return w_input_.value.dim(0); }
  std::size_t hidden() const { return w_hidden_.value.dim(0); }
  std::size_t output_width() const { return 2 * hidden(); }

  // tokens: [T x input_width], T >= 1. Returns [2 * hidden].
  Tensor encode(const Tensor& tokens);

  // Encodes every sequence; returns [n x 2 * hidden]. Caches all traces for
  // backward_batch.
  Tensor encode_batch(std::span<const Tensor* const> sequences);
  // Accumulates parameter gradients. Input gradients are returned only when
  // requested (one [T x input_width] tensor per sequence), else empty.
  std::vector<Tensor> backward_batch(const Tensor& doutput, bool want_input_grad);

  Parameter& w_input() { return w_input_; }
  Parameter& w_hidden() { return w_hidden_; }
  Parameter& bias() { return bias_; }
  void collect(ParameterList& out) {
    out.push_back(&w_input_);
    out.push_back(&w_hidden_);
    out.push_back(&bias_);
  }

 private:
  struct Trace {
    const Tensor* tokens = nullptr;
    RowMatrix gates;   // T x 4h, post-activation
    RowMatrix cells;   // (T+1) x h, row 0 is the initial state
    RowMatrix hiddens; // (T+1) x h
  };

  Trace run(const Tensor& tokens) const;
  Tensor backward_one(const Trace& trace, std::span<const double> dout, bool want_input_grad);

  Parameter w_input_;
  Parameter w_hidden_;
  Parameter bias_;
  std::vector<Trace> traces_;
};

}  // namespace ccn
