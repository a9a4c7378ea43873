#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kmyriad/errors.hpp"

namespace kmyriad {

// Dense row-major array of 64-bit reals. Finiteness is enforced at
// construction from raw values; downstream ops keep it by checking the
// overflow-prone primitives (exp, log) and the final gradients.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }
  // Wrap values computed by an internal kernel without the finiteness scan.
  static Tensor adopt(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  int extent(int axis) const;
  bool is_scalar() const { return size() == 1; }
  double item() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double operator[](std::int64_t i) const { return data_[i]; }
  double& operator[](std::int64_t i) { return data_[i]; }
  // Rank-2 element access.
  double at(int row, int col) const;

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

// Broadcast by trailing-extent alignment with extent-1 stretch; throws
// DimensionError when the shapes are incompatible.
std::vector<int> broadcast_shape(const std::vector<int>& a,
                                 const std::vector<int>& b);

}  // namespace kmyriad
