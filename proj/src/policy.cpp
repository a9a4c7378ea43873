#include "kmyriad/policy.hpp"

#include <cmath>
#include <string>

#include "kmyriad/errors.hpp"
#include "kmyriad/nn.hpp"

namespace kmyriad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;  // ln(2*pi)

// ln(1 - tanh(u)^2) = 2 * (ln 2 - |u| - ln(1 + e^{-2|u|})), stable for any u.
double log_one_minus_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * (0.6931471805599453 - a - std::log1p(std::exp(-2.0 * a)));
}

}  // namespace

MultiHeadPolicy::MultiHeadPolicy(PolicyDims dims, int heads, double act_low,
                                 double act_high, std::uint64_t seed)
    : dims_(dims), heads_(heads), act_low_(act_low), act_high_(act_high) {
  if (heads < 1) throw ContractError("policy needs at least one head");
  if (!(act_low < act_high)) throw ContractError("action bounds must satisfy low < high");
  int tensor_index = 0;
  auto next_rng = [&] { return Rng::derive(seed, stream::kInit, tensor_index++); };

  {
    Rng r = next_rng();
    trunk_w1_ = glorot_uniform(dims_.state_dim, dims_.trunk1, r);
  }
  trunk_b1_ = Tensor::zeros({dims_.trunk1});
  tensor_index++;
  {
    Rng r = next_rng();
    trunk_w2_ = glorot_uniform(dims_.trunk1, dims_.trunk2, r);
  }
  trunk_b2_ = Tensor::zeros({dims_.trunk2});
  tensor_index++;

  head_blocks_.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    HeadBlock blk;
    {
      Rng r = next_rng();
      blk.adapter_w = glorot_uniform(dims_.trunk2, dims_.adapter, r);
    }
    blk.adapter_b = Tensor::zeros({dims_.adapter});
    tensor_index++;
    {
      Rng r = next_rng();
      blk.mean_w = glorot_uniform(dims_.adapter, dims_.action_dim, r);
    }
    blk.mean_b = Tensor::zeros({dims_.action_dim});
    tensor_index++;
    {
      Rng r = next_rng();
      blk.logstd_w = glorot_uniform(dims_.adapter, dims_.action_dim, r);
    }
    // moderate initial action noise
    blk.logstd_b = Tensor::full({dims_.action_dim}, -0.5);
    tensor_index++;
    head_blocks_.push_back(std::move(blk));
  }
}

void MultiHeadPolicy::check_head(int head) const {
  if (head < 0 || head >= heads_) {
    throw ContractError("head index " + std::to_string(head) + " out of range [0," +
                        std::to_string(heads_) + ")");
  }
}

long long MultiHeadPolicy::param_count() const {
  long long n = 0;
  for (const Tensor* t : parameters()) n += t->size();
  return n;
}

std::vector<Tensor*> MultiHeadPolicy::parameters() {
  std::vector<Tensor*> out{&trunk_w1_, &trunk_b1_, &trunk_w2_, &trunk_b2_};
  for (auto& blk : head_blocks_) {
    out.push_back(&blk.adapter_w);
    out.push_back(&blk.adapter_b);
    out.push_back(&blk.mean_w);
    out.push_back(&blk.mean_b);
    out.push_back(&blk.logstd_w);
    out.push_back(&blk.logstd_b);
  }
  return out;
}

std::vector<const Tensor*> MultiHeadPolicy::parameters() const {
  auto mut = const_cast<MultiHeadPolicy*>(this)->parameters();
  return std::vector<const Tensor*>(mut.begin(), mut.end());
}

void MultiHeadPolicy::forward(const double* states, const int* heads, int rows,
                              double* mean, double* logstd) const {
  for (int r = 0; r < rows; ++r) check_head(heads[r]);
  const int t1 = dims_.trunk1;
  const int t2 = dims_.trunk2;
  const int ad = dims_.adapter;
  const int da = dims_.action_dim;

  std::vector<double> h1(static_cast<std::size_t>(rows) * t1);
  std::vector<double> h2(static_cast<std::size_t>(rows) * t2);
  linear_forward(states, rows, trunk_w1_, trunk_b1_, true, h1.data());
  linear_forward(h1.data(), rows, trunk_w2_, trunk_b2_, true, h2.data());

  // group rows by head so each adapter runs one dgemm over its sub-batch
  std::vector<std::vector<int>> by_head(heads_);
  for (int r = 0; r < rows; ++r) by_head[heads[r]].push_back(r);

  std::vector<double> gathered, z, mu, ls;
  for (int h = 0; h < heads_; ++h) {
    const auto& rows_h = by_head[h];
    if (rows_h.empty()) continue;
    const int b = static_cast<int>(rows_h.size());
    gathered.resize(static_cast<std::size_t>(b) * t2);
    for (int i = 0; i < b; ++i) {
      const double* src = h2.data() + static_cast<std::size_t>(rows_h[i]) * t2;
      std::copy(src, src + t2, gathered.data() + static_cast<std::size_t>(i) * t2);
    }
    const HeadBlock& blk = head_blocks_[h];
    z.resize(static_cast<std::size_t>(b) * ad);
    mu.resize(static_cast<std::size_t>(b) * da);
    ls.resize(static_cast<std::size_t>(b) * da);
    linear_forward(gathered.data(), b, blk.adapter_w, blk.adapter_b, true, z.data());
    linear_forward(z.data(), b, blk.mean_w, blk.mean_b, false, mu.data());
    linear_forward(z.data(), b, blk.logstd_w, blk.logstd_b, false, ls.data());
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < da; ++j) {
        const std::size_t dst = static_cast<std::size_t>(rows_h[i]) * da + j;
        mean[dst] = mu[static_cast<std::size_t>(i) * da + j];
        double v = ls[static_cast<std::size_t>(i) * da + j];
        v = v < kLogStdMin ? kLogStdMin : (v > kLogStdMax ? kLogStdMax : v);
        logstd[dst] = v;
      }
    }
  }
}

double MultiHeadPolicy::logp_from_presquash(const double* mean, const double* logstd,
                                            const double* u) const {
  const double half_span = 0.5 * (act_high_ - act_low_);
  double acc = 0.0;
  for (int j = 0; j < dims_.action_dim; ++j) {
    const double sigma = std::exp(logstd[j]);
    const double z = (u[j] - mean[j]) / sigma;
    acc += -0.5 * z * z - logstd[j] - 0.5 * kLogTwoPi;
    acc -= log_one_minus_tanh_sq(u[j]);
    acc -= std::log(half_span);
  }
  return acc;
}

void MultiHeadPolicy::sample_batch(const double* states, const int* heads, int rows,
                                   Rng* rngs, double* actions, double* presquash,
                                   double* logp) const {
  const int da = dims_.action_dim;
  std::vector<double> mean(static_cast<std::size_t>(rows) * da);
  std::vector<double> logstd(static_cast<std::size_t>(rows) * da);
  forward(states, heads, rows, mean.data(), logstd.data());

  const double half_span = 0.5 * (act_high_ - act_low_);
  for (int r = 0; r < rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * da;
    for (int j = 0; j < da; ++j) {
      const double sigma = std::exp(logstd[off + j]);
      const double u = mean[off + j] + sigma * rngs[r].normal();
      presquash[off + j] = u;
      double a = act_low_ + half_span * (std::tanh(u) + 1.0);
      // tanh saturates to exactly +-1 for |u| > ~19; keep actions strictly inside
      if (a >= act_high_) a = std::nextafter(act_high_, act_low_);
      if (a <= act_low_) a = std::nextafter(act_low_, act_high_);
      actions[off + j] = a;
    }
    logp[r] = logp_from_presquash(mean.data() + off, logstd.data() + off,
                                  presquash + off);
  }
}

void MultiHeadPolicy::sample_one(const double* state, int head, Rng& rng,
                                 double* action, double* presquash, double* logp) const {
  sample_batch(state, &head, 1, &rng, action, presquash, logp);
}

double MultiHeadPolicy::log_prob(const double* state, const double* action,
                                 int head) const {
  const int da = dims_.action_dim;
  std::vector<double> mean(da), logstd(da), u(da);
  forward(state, &head, 1, mean.data(), logstd.data());
  const double half_span = 0.5 * (act_high_ - act_low_);
  for (int j = 0; j < da; ++j) {
    const double t = (action[j] - act_low_) / half_span - 1.0;
    if (t <= -1.0 || t >= 1.0) {
      throw BoundaryError("action component " + std::to_string(j) +
                          " on or outside the bounds");
    }
    u[j] = std::atanh(t);
  }
  return logp_from_presquash(mean.data(), logstd.data(), u.data());
}

SingleHeadActor MultiHeadPolicy::to_single_head(int head) const {
  check_head(head);
  MultiHeadPolicy net(dims_, 1, act_low_, act_high_, 0);
  net.trunk_w1_ = trunk_w1_;
  net.trunk_b1_ = trunk_b1_;
  net.trunk_w2_ = trunk_w2_;
  net.trunk_b2_ = trunk_b2_;
  net.head_blocks_[0] = head_blocks_[head];
  return SingleHeadActor{std::move(net), head};
}

MultiHeadPolicy::Lifted MultiHeadPolicy::lift(Tape& tape) const {
  Lifted out;
  for (const Tensor* t : parameters()) out.params.push_back(tape.param(*t));
  return out;
}

std::pair<Value, Value> MultiHeadPolicy::head_graph(Tape& tape, const Lifted& lifted,
                                                    int head, Value states) const {
  check_head(head);
  const auto& p = lifted.params;
  Value h1 = dense(tape, states, p[0], p[1], true);
  Value h2 = dense(tape, h1, p[2], p[3], true);
  const int base = 4 + 6 * head;
  Value z = dense(tape, h2, p[base + 0], p[base + 1], true);
  Value mean = dense(tape, z, p[base + 2], p[base + 3], false);
  Value logstd = tape.clamp(dense(tape, z, p[base + 4], p[base + 5], false),
                            kLogStdMin, kLogStdMax);
  return {mean, logstd};
}

}  // namespace kmyriad
