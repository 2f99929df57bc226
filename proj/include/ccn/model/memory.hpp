#pragma once

#include <span>
#include <string>
#include <vector>

#include "ccn/math/layers.hpp"
#include "ccn/model/config.hpp"

namespace ccn {

// p[i, :] = masked_softmax(query_hat[i] . m_a[i, j] over j).
// query_hat [b x d], m_a [b x J x d], mask [b x J]. Returns [b x J].
Tensor attend(const Tensor& query_hat, const Tensor& m_a, const Mask& mask);

struct AttendGrad {
  Tensor query_hat;
  Tensor m_a;
};
AttendGrad attend_backward(const Tensor& query_hat, const Tensor& m_a, const Tensor& p,
                           const Tensor& dp);

// o[i] = sum_j p[i, j] m_c[i, j] + query_hat[i] over valid j. A row with no
// valid item returns query_hat unchanged.
Tensor memory_output(const Tensor& p, const Tensor& m_c, const Tensor& query_hat, const Mask& mask);

struct OutputGrad {
  Tensor p;
  Tensor m_c;
  Tensor query_hat;
};
OutputGrad memory_output_backward(const Tensor& p, const Tensor& m_c, const Tensor& dout);

/// Input and output embeddings of one memory: m = ReLU(item W + b).
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(const std::string& name, std::size_t input_dim, std::size_t mem_dim, Rng& rng);

  std::size_t input_dim() const { return input_.in_features(); }
  std::size_t mem_dim() const { return input_.out_features(); }

  // items [b x J x input_dim] -> m_a, m_c [b x J x mem_dim]. Throws
  // ConfigError naming the memory on a width mismatch.
  void embed(const Tensor& items, Tensor& m_a, Tensor& m_c);
  // Returns d items.
  Tensor backward(const Tensor& dm_a, const Tensor& dm_c);

  Linear& input() { return input_; }
  Linear& output() { return output_; }
  void collect(ParameterList& out) {
    input_.collect(out);
    output_.collect(out);
  }

 private:
  std::string name_;
  Linear input_;
  Linear output_;
  Tensor m_a_;
  Tensor m_c_;
};

// Unit-normalizes both embeddings and multiplies them elementwise. Rows of
// [b x n] inputs are handled independently. Throws NumericError on a zero
// vector.
Tensor clip_joint(const Tensor& clip_image, const Tensor& clip_text);

// Elementwise combination of equally shaped tensors for the non-concat fusion
// modes (avg_pool, max_pool, multiply). Max ties go to the first part.
Tensor combine(Fusion mode, std::span<const Tensor> parts);
std::vector<Tensor> combine_backward(Fusion mode, std::span<const Tensor> parts, const Tensor& dy);

}  // namespace ccn
