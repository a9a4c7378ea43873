#pragma once

#include <cstdint>
#include <vector>

#include "kmyriad/tensor.hpp"

namespace kmyriad {

class Tape;

// Handle to a value recorded on a tape.
class Value {
 public:
  Value() = default;
  const Tensor& tensor() const;
  const std::vector<int>& shape() const { return tensor().shape(); }
  double item() const { return tensor().item(); }
  int id() const { return id_; }

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Gradients for the parameter leaves of one backward pass.
class Gradients {
 public:
  bool has(const Value& v) const;
  const Tensor& of(const Value& v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<bool> present_;
};

// Reverse-accumulation tape. Operations append nodes in execution order,
// which is a valid topological order; backward() replays it in reverse.
// A tape is consumed by at most one backward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives a gradient.
  Value param(Tensor value);
  // Leaf excluded from differentiation.
  Value constant(Tensor value);

  Value matmul(Value a, Value b);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);
  Value minimum(Value a, Value b);
  Value relu(Value x);
  Value tanh(Value x);
  Value exp(Value x);
  Value log(Value x);
  // Elementwise clamp to [lo, hi]; derivative 0 where the input is clamped.
  Value clamp(Value x, double lo, double hi);
  Value mulc(Value x, double c);
  Value addc(Value x, double c);
  // Sum of all elements, yielding shape [1].
  Value sum(Value x);
  // Sum along the last axis of a rank-2 input: [r, c] -> [r, 1].
  Value row_sum(Value x);

  const Tensor& value_of(int id) const { return nodes_[id].value; }
  std::size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Reverse sweep from a scalar root; consumes the tape.
  Gradients backward(Value root);

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConst,
    kMatMul,
    kAdd,
    kSub,
    kMul,
    kMin,
    kRelu,
    kTanh,
    kExp,
    kLog,
    kClamp,
    kMulC,
    kAddC,
    kSum,
    kRowSum,
  };

  struct Node {
    Tensor value;
    Op op;
    int a = -1;
    int b = -1;
    double c0 = 0.0;
    double c1 = 0.0;
    bool requires_grad = false;
  };

  int push(Node n);
  Value make(Op op, Tensor value, int a, int b, double c0 = 0.0, double c1 = 0.0);
  void check_owned(const Value& v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace kmyriad
