#include "ccn/math/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ccn/errors.hpp"

namespace ccn {

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (element_count(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("cannot add " + shape_string(other.shape_) + " to " +
                         shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void Tensor::require_finite(std::string_view where) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError("non-finite value " + std::to_string(data_[i]) + " at index " +
                         std::to_string(i) + " in " + std::string(where));
    }
  }
}

namespace {

std::pair<Eigen::Index, Eigen::Index> matrix_extent(const Tensor& t) {
  if (t.rank() == 0) return {0, 0};
  if (t.rank() == 1) return {1, static_cast<Eigen::Index>(t.shape()[0])};
  const auto cols = static_cast<Eigen::Index>(t.shape().back());
  return {cols ? static_cast<Eigen::Index>(t.size()) / cols : 0, cols};
}

}  // namespace

MatrixView as_matrix(Tensor& t) {
  auto [r, c] = matrix_extent(t);
  return MatrixView(t.data().data(), r, c);
}

ConstMatrixView as_matrix(const Tensor& t) {
  auto [r, c] = matrix_extent(t);
  return ConstMatrixView(t.data().data(), r, c);
}

std::size_t Mask::count_row(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t j = 0; j < cols; ++j) n += bits[i * cols + j];
  return n;
}

}  // namespace ccn
