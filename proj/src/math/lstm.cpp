#include "ccn/math/lstm.hpp"

#include <cmath>

#include "ccn/errors.hpp"
#include "ccn/math/layers.hpp"

namespace ccn {

LstmEncoder::LstmEncoder(std::string name, std::size_t input_width, std::size_t hidden, Rng& rng)
    : w_input_(name + ".w_input", Tensor({input_width, 4 * hidden})),
      w_hidden_(name + ".w_hidden", Tensor({hidden, 4 * hidden})),
      bias_(name + ".bias", Tensor({4 * hidden})) {
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(input_width));
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : w_input_.value.data()) w = rng.uniform(-in_bound, in_bound);
  for (double& w : w_hidden_.value.data()) w = rng.uniform(-h_bound, h_bound);
}

LstmEncoder::Trace LstmEncoder::run(const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(0) == 0) {
    throw DimensionError("lstm: empty sequence (shape " + shape_string(tokens.shape()) + ")");
  }
  if (tokens.dim(1) != input_width()) {
    throw DimensionError("lstm: token width " + std::to_string(tokens.dim(1)) + ", expected " +
                         std::to_string(input_width()));
  }
  const auto steps = static_cast<Eigen::Index>(tokens.dim(0));
  const auto h = static_cast<Eigen::Index>(hidden());
  Trace tr;
  tr.tokens = &tokens;
  tr.gates = as_matrix(tokens) * as_matrix(w_input_.value);
  tr.gates.rowwise() += as_matrix(bias_.value).row(0);
  tr.cells = RowMatrix::Zero(steps + 1, h);
  tr.hiddens = RowMatrix::Zero(steps + 1, h);
  const auto wh = as_matrix(w_hidden_.value);
  for (Eigen::Index t = 0; t < steps; ++t) {
    auto g = tr.gates.row(t);
    g.noalias() += tr.hiddens.row(t) * wh;
    for (Eigen::Index k = 0; k < h; ++k) {
      g(k) = sigmoid(g(k));
      g(h + k) = sigmoid(g(h + k));
      g(2 * h + k) = std::tanh(g(2 * h + k));
      g(3 * h + k) = sigmoid(g(3 * h + k));
      const double c = g(h + k) * tr.cells(t, k) + g(k) * g(2 * h + k);
      tr.cells(t + 1, k) = c;
      tr.hiddens(t + 1, k) = g(3 * h + k) * std::tanh(c);
    }
  }
  return tr;
}

namespace {

Tensor summarize(const RowMatrix& hiddens, std::size_t h) {
  const Eigen::Index steps = hiddens.rows() - 1;
  Tensor out({2 * h});
  for (std::size_t k = 0; k < h; ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    out[k] = hiddens(steps, col);
    out[h + k] = hiddens.col(col).tail(steps).sum() / static_cast<double>(steps);
  }
  return out;
}

}  // namespace

Tensor LstmEncoder::encode(const Tensor& tokens) {
  return summarize(run(tokens).hiddens, hidden());
}

Tensor LstmEncoder::encode_batch(std::span<const Tensor* const> sequences) {
  traces_.clear();
  traces_.reserve(sequences.size());
  const std::size_t width = output_width();
  Tensor out({sequences.size(), width});
  for (std::size_t n = 0; n < sequences.size(); ++n) {
    traces_.push_back(run(*sequences[n]));
    const Tensor row = summarize(traces_.back().hiddens, hidden());
    std::copy(row.data().begin(), row.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(n * width));
  }
  return out;
}

std::vector<Tensor> LstmEncoder::backward_batch(const Tensor& doutput, bool want_input_grad) {
  if (doutput.rank() != 2 || doutput.dim(0) != traces_.size() ||
      doutput.dim(1) != output_width()) {
    throw DimensionError("lstm backward: upstream " + shape_string(doutput.shape()));
  }
  std::vector<Tensor> grads;
  grads.reserve(traces_.size());
  const std::size_t width = output_width();
  for (std::size_t n = 0; n < traces_.size(); ++n) {
    grads.push_back(backward_one(traces_[n], doutput.data().subspan(n * width, width),
                                 want_input_grad));
  }
  return grads;
}

Tensor LstmEncoder::backward_one(const Trace& tr, std::span<const double> dout,
                                 bool want_input_grad) {
  const Eigen::Index steps = tr.gates.rows();
  const auto h = static_cast<Eigen::Index>(hidden());
  RowMatrix dgates(steps, 4 * h);
  Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
  Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
  const auto wh = as_matrix(w_hidden_.value);
  const double inv_steps = 1.0 / static_cast<double>(steps);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto g = tr.gates.row(t);
    for (Eigen::Index k = 0; k < h; ++k) {
      double dh = dh_next(k) + dout[static_cast<std::size_t>(h + k)] * inv_steps;
      if (t == steps - 1) dh += dout[static_cast<std::size_t>(k)];
      const double c = tr.cells(t + 1, k);
      const double tc = std::tanh(c);
      const double ig = g(k), fg = g(h + k), cg = g(2 * h + k), og = g(3 * h + k);
      const double dc = dc_next(k) + dh * og * (1.0 - tc * tc);
      dgates(t, k) = dc * cg * ig * (1.0 - ig);
      dgates(t, h + k) = dc * tr.cells(t, k) * fg * (1.0 - fg);
      dgates(t, 2 * h + k) = dc * ig * (1.0 - cg * cg);
      dgates(t, 3 * h + k) = dh * tc * og * (1.0 - og);
      dc_next(k) = dc * fg;
    }
    dh_next.noalias() = dgates.row(t) * wh.transpose();
  }
  const auto x = as_matrix(*tr.tokens);
  as_matrix(w_input_.grad).noalias() += x.transpose() * dgates;
  as_matrix(w_hidden_.grad).noalias() += tr.hiddens.topRows(steps).transpose() * dgates;
  as_matrix(bias_.grad).row(0) += dgates.colwise().sum();
  if (!want_input_grad) return {};
  Tensor dx(tr.tokens->shape());
  as_matrix(dx).noalias() = dgates * as_matrix(w_input_.value).transpose();
  return dx;
}

}  // namespace ccn
