#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kmyriad/env.hpp"
#include "kmyriad/rng.hpp"
#include "kmyriad/tape.hpp"
#include "kmyriad/tensor.hpp"

namespace kmyriad {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct PolicyDims {
  int state_dim = kStateDim;
  int action_dim = kActionDim;
  int trunk1 = 512;
  int trunk2 = 256;
  int adapter = 256;
};

struct SingleHeadActor;

// Shared-trunk Gaussian policy: one backbone, per-head adapter and output
// maps, tanh-squashed actions rescaled to [act_low, act_high] per dimension.
//
// Parameter order (also the checkpoint order): trunk W1, b1, W2, b2, then for
// each head in index order: adapter W, adapter b, mean W, mean b, log-std W,
// log-std b.
class MultiHeadPolicy : public ActionSampler {
 public:
  MultiHeadPolicy(PolicyDims dims, int heads, double act_low, double act_high,
                  std::uint64_t seed);

  const PolicyDims& dims() const { return dims_; }
  int head_count() const { return heads_; }
  double act_low() const { return act_low_; }
  double act_high() const { return act_high_; }
  long long param_count() const;

  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  // Batched plain forward: one trunk pass, per-row head selection. Log-stds
  // come out clamped to [kLogStdMin, kLogStdMax].
  void forward(const double* states, const int* heads, int rows, double* mean,
               double* logstd) const;

  // ActionSampler: per-row sampling from rngs[row].
  void sample_batch(const double* states, const int* heads, int rows, Rng* rngs,
                    double* actions, double* presquash, double* logp) const override;

  void sample_one(const double* state, int head, Rng& rng, double* action,
                  double* presquash, double* logp) const;

  // Density of a recorded action; inverts the squash through atanh and
  // throws BoundaryError on or outside the action bounds.
  double log_prob(const double* state, const double* action, int head) const;

  // Density evaluated from a cached pre-squash vector. Shared by sampling,
  // importance ratios, and PPO so that equal parameters give bitwise equal
  // log-densities.
  double logp_from_presquash(const double* mean, const double* logstd,
                             const double* u) const;

  SingleHeadActor to_single_head(int head) const;

  // Differentiable forward for the rows of one head; states enter as a
  // constant, parameters as tape leaves in parameters() order.
  struct Lifted {
    std::vector<Value> params;
  };
  Lifted lift(Tape& tape) const;
  std::pair<Value, Value> head_graph(Tape& tape, const Lifted& lifted, int head,
                                     Value states) const;

 private:
  void check_head(int head) const;

  PolicyDims dims_;
  int heads_;
  double act_low_;
  double act_high_;
  Tensor trunk_w1_, trunk_b1_, trunk_w2_, trunk_b2_;
  struct HeadBlock {
    Tensor adapter_w, adapter_b, mean_w, mean_b, logstd_w, logstd_b;
  };
  std::vector<HeadBlock> head_blocks_;
};

// Trunk copy plus one adapter/output block, as produced by to_single_head.
struct SingleHeadActor {
  MultiHeadPolicy net;
  int source_head = 0;
};

}  // namespace kmyriad
