#include "kmyriad/tensor.hpp"

#include <cmath>
#include <sstream>

namespace kmyriad {

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int e : shape) {
    if (e <= 0) throw DimensionError("non-positive extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_size(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw DimensionError("shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in tensor");
  }
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_.assign(static_cast<std::size_t>(shape_size(t.shape_)), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  if (!std::isfinite(value)) throw NumericError("non-finite fill value");
  Tensor t = zeros(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

Tensor Tensor::adopt(std::vector<int> shape, std::vector<double> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  if (shape_size(t.shape_) != static_cast<std::int64_t>(t.data_.size())) {
    throw DimensionError("shape " + shape_str(t.shape_) + " does not match " +
                         std::to_string(t.data_.size()) + " values");
  }
  return t;
}

int Tensor::extent(int axis) const {
  if (axis < 0 || axis >= rank()) throw DimensionError("axis out of range");
  return shape_[axis];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of size " + std::to_string(size()));
  return data_[0];
}

double Tensor::at(int row, int col) const {
  if (rank() != 2) throw DimensionError("at(r,c) needs rank 2, got " + shape_str(shape_));
  return data_[static_cast<std::size_t>(row) * shape_[1] + col];
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape() == b.shape(); }

std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
  const int ra = static_cast<int>(a.size());
  const int rb = static_cast<int>(b.size());
  const int r = ra > rb ? ra : rb;
  std::vector<int> out(r);
  for (int i = 0; i < r; ++i) {
    const int ea = i < ra ? a[ra - 1 - i] : 1;
    const int eb = i < rb ? b[rb - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[r - 1 - i] = ea > eb ? ea : eb;
  }
  return out;
}

}  // namespace kmyriad
