#include "kmyriad/tape.hpp"

#include <cblas.h>

#include <cmath>
#include <cstring>

namespace kmyriad {

namespace {

// Row-major strides; broadcast dimensions get stride 0.
std::vector<std::int64_t> broadcast_strides(const std::vector<int>& shape,
                                            const std::vector<int>& out) {
  const int r = static_cast<int>(out.size());
  const int ra = static_cast<int>(shape.size());
  std::vector<std::int64_t> stride(r, 0);
  std::int64_t s = 1;
  for (int i = ra - 1; i >= 0; --i) {
    const int axis = r - (ra - i);
    stride[axis] = (shape[i] == 1) ? 0 : s;
    s *= shape[i];
  }
  return stride;
}

template <typename F>
Tensor elementwise_binary(const Tensor& a, const Tensor& b, F f) {
  const double* pa = a.data();
  const double* pb = b.data();
  if (same_shape(a, b)) {
    std::vector<double> out(a.size());
    for (std::int64_t i = 0; i < a.size(); ++i) out[i] = f(pa[i], pb[i]);
    return Tensor::adopt(a.shape(), std::move(out));
  }
  // bias pattern [r, c] op [c]
  if (a.rank() == 2 && b.rank() == 1 && a.extent(1) == b.extent(0)) {
    const int rows = a.extent(0), cols = a.extent(1);
    std::vector<double> out(a.size());
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) out[off + c] = f(pa[off + c], pb[c]);
    }
    return Tensor::adopt(a.shape(), std::move(out));
  }
  // column pattern [r, c] op [r, 1]
  if (a.rank() == 2 && b.rank() == 2 && b.extent(1) == 1 && a.extent(0) == b.extent(0)) {
    const int rows = a.extent(0), cols = a.extent(1);
    std::vector<double> out(a.size());
    for (int r = 0; r < rows; ++r) {
      const std::size_t off = static_cast<std::size_t>(r) * cols;
      const double bv = pb[r];
      for (int c = 0; c < cols; ++c) out[off + c] = f(pa[off + c], bv);
    }
    return Tensor::adopt(a.shape(), std::move(out));
  }
  const std::vector<int> shape = broadcast_shape(a.shape(), b.shape());
  const std::int64_t n = shape_size(shape);
  const auto sa = broadcast_strides(a.shape(), shape);
  const auto sb = broadcast_strides(b.shape(), shape);
  const int r = static_cast<int>(shape.size());
  std::vector<double> out(n);
  std::vector<int> idx(r, 0);
  std::int64_t oa = 0, ob = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = f(a.data()[oa], b.data()[ob]);
    for (int ax = r - 1; ax >= 0; --ax) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < shape[ax]) break;
      idx[ax] = 0;
      oa -= sa[ax] * shape[ax];
      ob -= sb[ax] * shape[ax];
    }
  }
  return Tensor(shape, std::move(out));
}

// Accumulate a gradient of shape `from` into a buffer of shape `to`,
// summing over broadcast axes.
void reduce_accumulate(const Tensor& grad, const std::vector<int>& to,
                       std::vector<double>& acc) {
  if (grad.shape() == to) {
    for (std::int64_t i = 0; i < grad.size(); ++i) acc[i] += grad[i];
    return;
  }
  const auto st = broadcast_strides(to, grad.shape());
  const int r = grad.rank();
  std::vector<int> idx(r, 0);
  std::int64_t ot = 0;
  for (std::int64_t i = 0; i < grad.size(); ++i) {
    acc[ot] += grad[i];
    for (int ax = r - 1; ax >= 0; --ax) {
      ++idx[ax];
      ot += st[ax];
      if (idx[ax] < grad.shape()[ax]) break;
      idx[ax] = 0;
      ot -= st[ax] * grad.shape()[ax];
    }
  }
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const int m = a.extent(0);
  const int k = a.extent(1);
  const int n = b.extent(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a.data(),
              k, b.data(), n, 0.0, out.data(), n);
  return Tensor({m, n}, std::move(out));
}

void matmul_accumulate(const Tensor& a, const Tensor& b, bool ta, bool tb,
                       std::vector<double>& acc) {
  const int m = ta ? a.extent(1) : a.extent(0);
  const int k = ta ? a.extent(0) : a.extent(1);
  const int n = tb ? b.extent(0) : b.extent(1);
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a.data(),
              a.extent(1), b.data(), b.extent(1), 1.0, acc.data(), n);
}

}  // namespace

const Tensor& Value::tensor() const {
  if (tape_ == nullptr) throw ContractError("default-constructed Value");
  return tape_->value_of(id_);
}

bool Gradients::has(const Value& v) const {
  return v.id() >= 0 && v.id() < static_cast<int>(present_.size()) && present_[v.id()];
}

const Tensor& Gradients::of(const Value& v) const {
  if (!has(v)) throw ContractError("no gradient recorded for this value");
  return grads_[v.id()];
}

int Tape::push(Node n) {
  if (consumed_) throw ContractError("tape already consumed by backward()");
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Value Tape::make(Op op, Tensor value, int a, int b, double c0, double c1) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.a = a;
  n.b = b;
  n.c0 = c0;
  n.c1 = c1;
  n.requires_grad = (a >= 0 && nodes_[a].requires_grad) ||
                    (b >= 0 && nodes_[b].requires_grad);
  return Value(this, push(std::move(n)));
}

void Tape::check_owned(const Value& v) const {
  if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int>(nodes_.size())) {
    throw ContractError("value does not belong to this tape");
  }
}

Value Tape::param(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::kLeaf;
  n.requires_grad = true;
  return Value(this, push(std::move(n)));
}

Value Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = Op::kConst;
  n.requires_grad = false;
  return Value(this, push(std::move(n)));
}

Value Tape::matmul(Value a, Value b) {
  check_owned(a);
  check_owned(b);
  const Tensor& ta = nodes_[a.id_].value;
  const Tensor& tb = nodes_[b.id_].value;
  if (ta.rank() != 2 || tb.rank() != 2) {
    throw DimensionError("matmul needs rank-2 operands, got " +
                         shape_str(ta.shape()) + " and " + shape_str(tb.shape()));
  }
  if (ta.extent(1) != tb.extent(0)) {
    throw DimensionError("matmul inner extents differ: " + shape_str(ta.shape()) +
                         " vs " + shape_str(tb.shape()));
  }
  return make(Op::kMatMul, matmul_values(ta, tb), a.id_, b.id_);
}

Value Tape::add(Value a, Value b) {
  check_owned(a);
  check_owned(b);
  return make(Op::kAdd,
              elementwise_binary(nodes_[a.id_].value, nodes_[b.id_].value,
                                 [](double x, double y) { return x + y; }),
              a.id_, b.id_);
}

Value Tape::sub(Value a, Value b) {
  check_owned(a);
  check_owned(b);
  return make(Op::kSub,
              elementwise_binary(nodes_[a.id_].value, nodes_[b.id_].value,
                                 [](double x, double y) { return x - y; }),
              a.id_, b.id_);
}

Value Tape::mul(Value a, Value b) {
  check_owned(a);
  check_owned(b);
  return make(Op::kMul,
              elementwise_binary(nodes_[a.id_].value, nodes_[b.id_].value,
                                 [](double x, double y) { return x * y; }),
              a.id_, b.id_);
}

Value Tape::minimum(Value a, Value b) {
  check_owned(a);
  check_owned(b);
  return make(Op::kMin,
              elementwise_binary(nodes_[a.id_].value, nodes_[b.id_].value,
                                 [](double x, double y) { return x <= y ? x : y; }),
              a.id_, b.id_);
}

Value Tape::relu(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t[i] > 0.0 ? t[i] : 0.0;
  return make(Op::kRelu, Tensor(t.shape(), std::move(out)), x.id_, -1);
}

Value Tape::tanh(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = std::tanh(t[i]);
  return make(Op::kTanh, Tensor(t.shape(), std::move(out)), x.id_, -1);
}

Value Tape::exp(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) {
    out[i] = std::exp(t[i]);
    if (!std::isfinite(out[i])) throw DomainError("exp overflow");
  }
  return make(Op::kExp, Tensor(t.shape(), std::move(out)), x.id_, -1);
}

Value Tape::log(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0) throw DomainError("log of non-positive value");
    out[i] = std::log(t[i]);
  }
  return make(Op::kLog, Tensor(t.shape(), std::move(out)), x.id_, -1);
}

Value Tape::clamp(Value x, double lo, double hi) {
  check_owned(x);
  if (lo > hi) throw ContractError("clamp with lo > hi");
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) {
    out[i] = t[i] < lo ? lo : (t[i] > hi ? hi : t[i]);
  }
  return make(Op::kClamp, Tensor(t.shape(), std::move(out)), x.id_, -1, lo, hi);
}

Value Tape::mulc(Value x, double c) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t[i] * c;
  return make(Op::kMulC, Tensor(t.shape(), std::move(out)), x.id_, -1, c);
}

Value Tape::addc(Value x, double c) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  std::vector<double> out(t.size());
  for (std::int64_t i = 0; i < t.size(); ++i) out[i] = t[i] + c;
  return make(Op::kAddC, Tensor(t.shape(), std::move(out)), x.id_, -1, c);
}

Value Tape::sum(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  double s = 0.0;
  for (std::int64_t i = 0; i < t.size(); ++i) s += t[i];
  return make(Op::kSum, Tensor({1}, {s}), x.id_, -1);
}

Value Tape::row_sum(Value x) {
  check_owned(x);
  const Tensor& t = nodes_[x.id_].value;
  if (t.rank() != 2) throw DimensionError("row_sum needs rank 2, got " + shape_str(t.shape()));
  const int rows = t.extent(0);
  const int cols = t.extent(1);
  std::vector<double> out(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int c = 0; c < cols; ++c) s += t.data()[static_cast<std::size_t>(r) * cols + c];
    out[r] = s;
  }
  return make(Op::kRowSum, Tensor({rows, 1}, std::move(out)), x.id_, -1);
}

Gradients Tape::backward(Value root) {
  check_owned(root);
  if (consumed_) throw ContractError("tape already consumed by backward()");
  if (nodes_[root.id_].value.size() != 1) {
    throw ContractError("backward root must be a scalar");
  }
  consumed_ = true;

  const int n = static_cast<int>(nodes_.size());
  std::vector<std::vector<double>> grad(n);
  auto ensure = [&](int id) -> std::vector<double>& {
    if (grad[id].empty()) grad[id].assign(nodes_[id].value.size(), 0.0);
    return grad[id];
  };
  ensure(root.id_)[0] = 1.0;

  for (int id = root.id_; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || grad[id].empty()) continue;
    if (node.op == Op::kLeaf || node.op == Op::kConst) continue;
    Tensor up = Tensor::adopt(node.value.shape(), std::move(grad[id]));

    const int ia = node.a;
    const int ib = node.b;
    const bool wa = ia >= 0 && nodes_[ia].requires_grad;
    const bool wb = ib >= 0 && nodes_[ib].requires_grad;
    switch (node.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[ia].value;
        const Tensor& b = nodes_[ib].value;
        if (wa) matmul_accumulate(up, b, false, true, ensure(ia));
        if (wb) matmul_accumulate(a, up, true, false, ensure(ib));
        break;
      }
      case Op::kAdd: {
        if (wa) reduce_accumulate(up, nodes_[ia].value.shape(), ensure(ia));
        if (wb) reduce_accumulate(up, nodes_[ib].value.shape(), ensure(ib));
        break;
      }
      case Op::kSub: {
        if (wa) reduce_accumulate(up, nodes_[ia].value.shape(), ensure(ia));
        if (wb) {
          Tensor neg = up;
          for (std::int64_t i = 0; i < neg.size(); ++i) neg[i] = -neg[i];
          reduce_accumulate(neg, nodes_[ib].value.shape(), ensure(ib));
        }
        break;
      }
      case Op::kMul: {
        const Tensor& a = nodes_[ia].value;
        const Tensor& b = nodes_[ib].value;
        if (wa) {
          Tensor t = elementwise_binary(up, b, [](double u, double y) { return u * y; });
          reduce_accumulate(t, a.shape(), ensure(ia));
        }
        if (wb) {
          Tensor t = elementwise_binary(up, a, [](double u, double x) { return u * x; });
          reduce_accumulate(t, b.shape(), ensure(ib));
        }
        break;
      }
      case Op::kMin: {
        const Tensor& a = nodes_[ia].value;
        const Tensor& b = nodes_[ib].value;
        // route each element to the argmin; ties go to the first operand
        Tensor mask = elementwise_binary(a, b, [](double x, double y) {
          return x <= y ? 1.0 : 0.0;
        });
        if (wa) {
          Tensor t = elementwise_binary(up, mask, [](double u, double m) { return u * m; });
          reduce_accumulate(t, a.shape(), ensure(ia));
        }
        if (wb) {
          Tensor t = elementwise_binary(up, mask, [](double u, double m) { return u * (1.0 - m); });
          reduce_accumulate(t, b.shape(), ensure(ib));
        }
        break;
      }
      case Op::kRelu: {
        if (wa) {
          const Tensor& x = nodes_[ia].value;
          auto& acc = ensure(ia);
          // subgradient at 0 is 0
          for (std::int64_t i = 0; i < up.size(); ++i) {
            if (x[i] > 0.0) acc[i] += up[i];
          }
        }
        break;
      }
      case Op::kTanh: {
        if (wa) {
          const Tensor& y = node.value;
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) acc[i] += up[i] * (1.0 - y[i] * y[i]);
        }
        break;
      }
      case Op::kExp: {
        if (wa) {
          const Tensor& y = node.value;
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) acc[i] += up[i] * y[i];
        }
        break;
      }
      case Op::kLog: {
        if (wa) {
          const Tensor& x = nodes_[ia].value;
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) acc[i] += up[i] / x[i];
        }
        break;
      }
      case Op::kClamp: {
        if (wa) {
          const Tensor& x = nodes_[ia].value;
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) {
            if (x[i] > node.c0 && x[i] < node.c1) acc[i] += up[i];
          }
        }
        break;
      }
      case Op::kMulC: {
        if (wa) {
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) acc[i] += up[i] * node.c0;
        }
        break;
      }
      case Op::kAddC: {
        if (wa) {
          auto& acc = ensure(ia);
          for (std::int64_t i = 0; i < up.size(); ++i) acc[i] += up[i];
        }
        break;
      }
      case Op::kSum: {
        if (wa) {
          auto& acc = ensure(ia);
          const double u = up[0];
          for (auto& g : acc) g += u;
        }
        break;
      }
      case Op::kRowSum: {
        if (wa) {
          const Tensor& x = nodes_[ia].value;
          auto& acc = ensure(ia);
          const int cols = x.extent(1);
          for (int r = 0; r < x.extent(0); ++r) {
            const double u = up[r];
            for (int c = 0; c < cols; ++c) acc[static_cast<std::size_t>(r) * cols + c] += u;
          }
        }
        break;
      }
    }
  }

  Gradients result;
  result.grads_.resize(n);
  result.present_.assign(n, false);
  for (int id = 0; id < n; ++id) {
    if (nodes_[id].op != Op::kLeaf) continue;
    Tensor g = Tensor::zeros(nodes_[id].value.shape());
    if (!grad[id].empty()) g.values() = std::move(grad[id]);
    result.grads_[id] = std::move(g);
    result.present_[id] = true;
  }
  return result;
}

}  // namespace kmyriad
