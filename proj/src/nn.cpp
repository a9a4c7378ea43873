#include "kmyriad/nn.hpp"

#include <cblas.h>

#include <cmath>

namespace kmyriad {

void linear_forward(const double* x, int rows, const Tensor& w, const Tensor& b,
                    bool relu, double* out) {
  const int in = w.extent(0);
  const int cols = w.extent(1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(r) * cols + c] = b[c];
  }
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, rows, cols, in, 1.0, x,
              in, w.data(), cols, 1.0, out, cols);
  if (relu) {
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    for (std::size_t i = 0; i < n; ++i) {
      if (out[i] < 0.0) out[i] = 0.0;
    }
  }
}

Value dense(Tape& tape, Value x, Value w, Value b, bool relu) {
  Value y = tape.add(tape.matmul(x, w), b);
  return relu ? tape.relu(y) : y;
}

Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<double> v(static_cast<std::size_t>(fan_in) * fan_out);
  for (auto& x : v) x = rng.uniform(-limit, limit);
  return Tensor({fan_in, fan_out}, std::move(v));
}

}  // namespace kmyriad
