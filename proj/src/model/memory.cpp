#include "ccn/model/memory.hpp"

#include <cmath>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

void check_memory_shapes(const Tensor& query_hat, const Tensor& m, const char* what) {
  if (query_hat.rank() != 2 || m.rank() != 3 || m.dim(0) != query_hat.dim(0) ||
      m.dim(2) != query_hat.dim(1)) {
    throw DimensionError(std::string(what) + ": query " + shape_string(query_hat.shape()) +
                         " vs memory " + shape_string(m.shape()));
  }
}

}  // namespace

Tensor attend(const Tensor& query_hat, const Tensor& m_a, const Mask& mask) {
  check_memory_shapes(query_hat, m_a, "attend");
  const std::size_t b = m_a.dim(0), J = m_a.dim(1), d = m_a.dim(2);
  Tensor logits({b, J});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      if (!mask(i, j)) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += query_hat(i, k) * m_a(i, j, k);
      logits(i, j) = s;
    }
  }
  return masked_softmax(logits, mask);
}

AttendGrad attend_backward(const Tensor& query_hat, const Tensor& m_a, const Tensor& p,
                           const Tensor& dp) {
  const std::size_t b = m_a.dim(0), J = m_a.dim(1), d = m_a.dim(2);
  const Tensor dlogits = masked_softmax_backward(p, dp);
  AttendGrad g{Tensor(query_hat.shape()), Tensor(m_a.shape())};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double dl = dlogits(i, j);
      if (dl == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        g.query_hat(i, k) += dl * m_a(i, j, k);
        g.m_a(i, j, k) += dl * query_hat(i, k);
      }
    }
  }
  return g;
}

Tensor memory_output(const Tensor& p, const Tensor& m_c, const Tensor& query_hat, const Mask& mask) {
  check_memory_shapes(query_hat, m_c, "memory_output");
  const std::size_t b = m_c.dim(0), J = m_c.dim(1), d = m_c.dim(2);
  Tensor o = query_hat;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      if (!mask(i, j)) continue;
      for (std::size_t k = 0; k < d; ++k) o(i, k) += p(i, j) * m_c(i, j, k);
    }
  }
  return o;
}

OutputGrad memory_output_backward(const Tensor& p, const Tensor& m_c, const Tensor& dout) {
  const std::size_t b = m_c.dim(0), J = m_c.dim(1), d = m_c.dim(2);
  OutputGrad g{Tensor(p.shape()), Tensor(m_c.shape()), dout};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        s += dout(i, k) * m_c(i, j, k);
        g.m_c(i, j, k) = p(i, j) * dout(i, k);
      }
      g.p(i, j) = s;
    }
  }
  return g;
}

MemoryBank::MemoryBank(const std::string& name, std::size_t input_dim, std::size_t mem_dim, Rng& rng)
    : name_(name), input_(name + ".a", input_dim, mem_dim, rng), output_(name + ".c", input_dim, mem_dim, rng) {}

void MemoryBank::embed(const Tensor& items, Tensor& m_a, Tensor& m_c) {
  if (items.rank() != 3 || items.dim(2) != input_dim()) {
    throw ConfigError("memory '" + name_ + "': items " + shape_string(items.shape()) +
                      " but the bank expects width " + std::to_string(input_dim()));
  }
  m_a_ = relu(input_.forward(items));
  m_c_ = relu(output_.forward(items));
  m_a = m_a_;
  m_c = m_c_;
}

Tensor MemoryBank::backward(const Tensor& dm_a, const Tensor& dm_c) {
  Tensor dx = input_.backward(relu_backward(m_a_, dm_a));
  dx += output_.backward(relu_backward(m_c_, dm_c));
  return dx;
}

Tensor clip_joint(const Tensor& clip_image, const Tensor& clip_text) {
  if (clip_image.shape() != clip_text.shape() || clip_image.rank() == 0) {
    throw DimensionError("clip_joint: image " + shape_string(clip_image.shape()) + " vs text " +
                         shape_string(clip_text.shape()));
  }
  const std::size_t n = clip_image.shape().back();
  const std::size_t rows = clip_image.size() / n;
  Tensor out(clip_image.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double ni = 0.0, nt = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      ni += clip_image[r * n + k] * clip_image[r * n + k];
      nt += clip_text[r * n + k] * clip_text[r * n + k];
    }
    if (!(ni > 0.0) || !(nt > 0.0)) {
      throw NumericError("clip_joint: cannot normalize a zero embedding (row " + std::to_string(r) + ")");
    }
    const double scale = 1.0 / (std::sqrt(ni) * std::sqrt(nt));
    for (std::size_t k = 0; k < n; ++k) {
      out[r * n + k] = clip_image[r * n + k] * clip_text[r * n + k] * scale;
    }
  }
  return out;
}

Tensor combine(Fusion mode, std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("fusion: nothing to combine");
  if (mode == Fusion::concat) throw ConfigError("fusion: concat is not an elementwise mode");
  for (const Tensor& t : parts) {
    if (t.shape() != parts[0].shape()) {
      throw DimensionError("fusion: " + shape_string(parts[0].shape()) + " vs " + shape_string(t.shape()));
    }
  }
  Tensor out = parts[0];
  for (std::size_t n = 1; n < parts.size(); ++n) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      switch (mode) {
        case Fusion::avg_pool: out[k] += parts[n][k]; break;
        case Fusion::max_pool: out[k] = std::max(out[k], parts[n][k]); break;
        case Fusion::multiply: out[k] *= parts[n][k]; break;
        case Fusion::concat: break;
      }
    }
  }
  if (mode == Fusion::avg_pool) {
    for (double& v : out.data()) v /= static_cast<double>(parts.size());
  }
  return out;
}

std::vector<Tensor> combine_backward(Fusion mode, std::span<const Tensor> parts, const Tensor& dy) {
  std::vector<Tensor> grads(parts.size(), Tensor(dy.shape()));
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (std::size_t k = 0; k < dy.size(); ++k) {
    switch (mode) {
      case Fusion::avg_pool:
        for (auto& g : grads) g[k] = dy[k] * inv;
        break;
      case Fusion::max_pool: {
        std::size_t best = 0;
        for (std::size_t n = 1; n < parts.size(); ++n) {
          if (parts[n][k] > parts[best][k]) best = n;
        }
        grads[best][k] = dy[k];
        break;
      }
      case Fusion::multiply:
        for (std::size_t n = 0; n < parts.size(); ++n) {
          double prod = dy[k];
          for (std::size_t m = 0; m < parts.size(); ++m) {
            if (m != n) prod *= parts[m][k];
          }
          grads[n][k] = prod;
        }
        break;
      case Fusion::concat: throw ConfigError("fusion: concat is not an elementwise mode");
    }
  }
  return grads;
}

}  // namespace ccn
