#include <doctest.h>

#include <cmath>

#include "kmyriad/tape.hpp"
#include "kmyriad/tensor.hpp"
#include "testutil.hpp"

using kmyriad::DimensionError;
using kmyriad::DomainError;
using kmyriad::ContractError;
using kmyriad::Gradients;
using kmyriad::NumericError;
using kmyriad::Rng;
using kmyriad::Tape;
using kmyriad::Tensor;
using kmyriad::Value;

TEST_CASE("tensor shape and finiteness invariants") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 6);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), NumericError);
  CHECK_THROWS_AS(Tensor({1}, {1.0 / 0.0}), NumericError);
}

TEST_CASE("matmul identity and hand product") {
  Tape tape;
  Value eye = tape.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Value v = tape.constant(Tensor({2, 1}, {3, 4}));
  Value r = tape.matmul(eye, v);
  CHECK(r.tensor()[0] == 3);
  CHECK(r.tensor()[1] == 4);

  Value a = tape.constant(Tensor({1, 2}, {1, 2}));
  Value b = tape.constant(Tensor({2, 1}, {3, 4}));
  CHECK(tape.matmul(a, b).item() == 11);

  CHECK_THROWS_AS(tape.matmul(b, eye), DimensionError);
}

TEST_CASE("matmul gradient matches central differences") {
  Rng rng(11);
  const int m = 3, k = 4, n = 2;
  const auto a0 = testutil::random_values(rng, m * k);
  const auto b0 = testutil::random_values(rng, k * n);

  Tape tape;
  Value a = tape.param(Tensor({m, k}, a0));
  Value b = tape.param(Tensor({k, n}, b0));
  Value loss = tape.sum(tape.matmul(a, b));
  Gradients g = tape.backward(loss);

  auto eval = [&](const std::vector<double>& av) {
    Tape t;
    Value aa = t.param(Tensor({m, k}, av));
    Value bb = t.constant(Tensor({k, n}, b0));
    return t.sum(t.matmul(aa, bb)).item();
  };
  const auto fd = testutil::finite_difference(eval, a0);
  CHECK(testutil::max_rel_err(g.of(a).values(), fd) < 1e-4);
}

TEST_CASE("elementwise examples") {
  Tape tape;
  Value x = tape.param(Tensor({3}, {-1, 0, 2}));
  Value r = tape.relu(x);
  CHECK(r.tensor()[0] == 0);
  CHECK(r.tensor()[1] == 0);
  CHECK(r.tensor()[2] == 2);

  Tape t2;
  Value z = t2.param(Tensor::scalar(0.0));
  Value th = t2.tanh(z);
  CHECK(th.item() == 0.0);
  Gradients g = t2.backward(t2.sum(th));
  CHECK(g.of(z).values()[0] == 1.0);  // tanh'(0) = 1 - tanh^2(0)

  Tape t3;
  Value w = t3.param(Tensor::scalar(2.0));
  Gradients g3 = t3.backward(t3.log(w));
  CHECK(g3.of(w).values()[0] == doctest::Approx(0.5).epsilon(1e-9));

  Tape t4;
  Value bad = t4.constant(Tensor::scalar(-1.0));
  CHECK_THROWS_AS(t4.log(bad), DomainError);
  CHECK_THROWS_AS(t4.exp(t4.constant(Tensor::scalar(1000.0))), DomainError);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape tape;
  Value x = tape.param(Tensor({2}, {0.0, 1.0}));
  Gradients g = tape.backward(tape.sum(tape.relu(x)));
  CHECK(g.of(x).values()[0] == 0.0);
  CHECK(g.of(x).values()[1] == 1.0);
}

TEST_CASE("broadcasting follows trailing-extent alignment") {
  Tape tape;
  Value m = tape.param(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Value bias = tape.param(Tensor({3}, {10, 20, 30}));
  Value s = tape.add(m, bias);
  CHECK(s.tensor().at(0, 0) == 11);
  CHECK(s.tensor().at(1, 2) == 36);

  Value col = tape.param(Tensor({2, 1}, {1, 2}));
  Value p = tape.mul(m, col);
  CHECK(p.tensor().at(0, 2) == 3);
  CHECK(p.tensor().at(1, 0) == 8);

  Value bad = tape.param(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(tape.add(m, bad), DimensionError);

  // gradient of a broadcast operand sums over the stretched axes
  Gradients g = tape.backward(tape.sum(s));
  CHECK(g.of(bias).values() == std::vector<double>{2, 2, 2});
}

TEST_CASE("backward basics") {
  // f(x) = x^2 at x = 3 -> 6
  Tape tape;
  Value x = tape.param(Tensor::scalar(3.0));
  Value f = tape.mul(x, x);
  Gradients g = tape.backward(f);
  CHECK(g.of(x).values()[0] == 6.0);

  // constant loss -> all-zero gradients
  Tape t2;
  Value p = t2.param(Tensor({2}, {1, 2}));
  Value c = t2.constant(Tensor::scalar(7.0));
  Gradients g2 = t2.backward(t2.sum(c));
  CHECK(g2.of(p).values() == std::vector<double>{0, 0});

  // non-scalar root and tape reuse are contract errors
  Tape t3;
  Value v = t3.param(Tensor({2}, {1, 2}));
  CHECK_THROWS_AS(t3.backward(v), ContractError);
  Value s = t3.sum(v);
  t3.backward(s);
  CHECK_THROWS_AS(t3.backward(s), ContractError);
}

namespace {

// tiny two-layer perceptron loss over a flat parameter vector, for the
// finite-difference oracle: layers [4 -> 5 -> 1], relu in between,
// squared output as the loss
double mlp_loss(const std::vector<double>& theta, const std::vector<double>& input,
                std::vector<double>* analytic_grad) {
  const int d_in = 4, d_h = 5;
  Tape tape;
  auto slice = [&](int offset, int len) {
    return std::vector<double>(theta.begin() + offset, theta.begin() + offset + len);
  };
  int at = 0;
  Value w1 = tape.param(Tensor({d_in, d_h}, slice(at, d_in * d_h)));
  at += d_in * d_h;
  Value b1 = tape.param(Tensor({d_h}, slice(at, d_h)));
  at += d_h;
  Value w2 = tape.param(Tensor({d_h, 1}, slice(at, d_h)));
  at += d_h;
  Value b2 = tape.param(Tensor({1}, slice(at, 1)));

  Value x = tape.constant(Tensor({1, d_in}, input));
  Value h = tape.relu(tape.add(tape.matmul(x, w1), b1));
  Value out = tape.add(tape.matmul(h, w2), b2);
  Value loss = tape.sum(tape.mul(out, out));
  const double value = loss.item();
  if (analytic_grad) {
    Gradients g = tape.backward(loss);
    analytic_grad->clear();
    for (const Value* v : {&w1, &b1, &w2, &b2}) {
      const auto& t = g.of(*v).values();
      analytic_grad->insert(analytic_grad->end(), t.begin(), t.end());
    }
  }
  return value;
}

}  // namespace

TEST_CASE("two-layer perceptron gradient check over random draws") {
  const int n_params = 4 * 5 + 5 + 5 + 1;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    Rng rng(1000 + draw);
    const auto theta = testutil::random_values(rng, n_params);
    const auto input = testutil::random_values(rng, 4);
    std::vector<double> analytic;
    mlp_loss(theta, input, &analytic);
    const auto fd = testutil::finite_difference(
        [&](const std::vector<double>& th) { return mlp_loss(th, input, nullptr); },
        theta);
    worst = std::max(worst, testutil::max_rel_err(analytic, fd));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("backward is linear in the root") {
  Rng rng(5);
  const auto p0 = testutil::random_values(rng, 6);
  const double ca = 1.7, cb = -0.6;

  auto grads_for = [&](double wa, double wb) {
    Tape tape;
    Value p = tape.param(Tensor({2, 3}, p0));
    Value f = tape.sum(tape.mul(p, p));
    Value g = tape.sum(tape.exp(tape.mulc(p, 0.3)));
    Value root = tape.add(tape.mulc(f, wa), tape.mulc(g, wb));
    Gradients gr = tape.backward(root);
    return gr.of(p).values();
  };

  const auto gf = grads_for(1.0, 0.0);
  const auto gg = grads_for(0.0, 1.0);
  const auto gmix = grads_for(ca, cb);
  for (std::size_t i = 0; i < gmix.size(); ++i) {
    CHECK(gmix[i] == doctest::Approx(ca * gf[i] + cb * gg[i]).epsilon(1e-12));
  }
}

TEST_CASE("determinism: identical graphs give identical bits") {
  auto run = [] {
    Rng rng(42);
    Tape tape;
    Value p = tape.param(Tensor({4, 4}, testutil::random_values(rng, 16)));
    Value q = tape.param(Tensor({4, 4}, testutil::random_values(rng, 16)));
    Value loss = tape.sum(tape.tanh(tape.matmul(p, q)));
    Gradients g = tape.backward(loss);
    std::vector<double> out = g.of(p).values();
    const auto& gq = g.of(q).values();
    out.insert(out.end(), gq.begin(), gq.end());
    out.push_back(loss.item());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("clamp and minimum gradients") {
  Tape tape;
  Value x = tape.param(Tensor({3}, {-7.0, 0.5, 4.0}));
  Value c = tape.clamp(x, -5.0, 2.0);
  CHECK(c.tensor()[0] == -5.0);
  CHECK(c.tensor()[1] == 0.5);
  CHECK(c.tensor()[2] == 2.0);
  Gradients g = tape.backward(tape.sum(c));
  CHECK(g.of(x).values() == std::vector<double>{0, 1, 0});

  Tape t2;
  Value a = t2.param(Tensor({2}, {1.0, 5.0}));
  Value b = t2.param(Tensor({2}, {3.0, 2.0}));
  Value mn = t2.minimum(a, b);
  CHECK(mn.tensor()[0] == 1.0);
  CHECK(mn.tensor()[1] == 2.0);
  Gradients g2 = t2.backward(t2.sum(mn));
  CHECK(g2.of(a).values() == std::vector<double>{1, 0});
  CHECK(g2.of(b).values() == std::vector<double>{0, 1});
}

TEST_CASE("row_sum") {
  Tape tape;
  Value x = tape.param(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Value r = tape.row_sum(x);
  CHECK(r.tensor().shape() == std::vector<int>{2, 1});
  CHECK(r.tensor()[0] == 6);
  CHECK(r.tensor()[1] == 15);
  Gradients g = tape.backward(tape.sum(tape.mul(r, tape.constant(Tensor({2, 1}, {2, 3})))));
  CHECK(g.of(x).values() == std::vector<double>{2, 2, 2, 3, 3, 3});
}
