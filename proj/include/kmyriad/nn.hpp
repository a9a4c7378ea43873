#pragma once

#include "kmyriad/rng.hpp"
#include "kmyriad/tape.hpp"
#include "kmyriad/tensor.hpp"

namespace kmyriad {

// out[rows, W.cols] = x[rows, W.rows] * W + b, optionally through relu.
// Plain inference path; the differentiable twin is dense() below.
void linear_forward(const double* x, int rows, const Tensor& w, const Tensor& b,
                    bool relu, double* out);

Value dense(Tape& tape, Value x, Value w, Value b, bool relu);

// Fan-based uniform init in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);

}  // namespace kmyriad
