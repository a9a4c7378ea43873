#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kmyriad/env.hpp"
#include "kmyriad/estimators.hpp"
#include "kmyriad/policy.hpp"

namespace kmyriad {

// Deterministic head -> replica partition: contiguous blocks whose sizes
// differ by at most one.
struct Assignment {
  std::vector<int> head_of_replica;
  int head_count = 0;
};

Assignment assign(int m_env, int heads);

struct TrainConfig {
  int epochs = 200;
  double lr = 2e-4;
  std::vector<int> lr_milestones{30, 80};
  double lr_decay = 0.5;
  int k = 5;
  int envs = 1000;
  int heads = 10;
  int horizon = 600;
  std::vector<std::uint64_t> seeds{0, 1, 56, 123};
  bool project_xy = true;  // entropy particles are the (x, y) state projection
  TerrainSpec terrain = TerrainSpec::empty();
  PolicyDims policy_dims{};
  double act_low = -1.0;
  double act_high = 1.0;

  void validate() const;
};

// Frozen copy of the policy taken at rollout start; immutable for the epoch.
struct BehaviorSnapshot {
  MultiHeadPolicy policy;
  explicit BehaviorSnapshot(const MultiHeadPolicy& p) : policy(p) {}
};

// Pool the post-action states s_1..s_T of every replica into one cloud
// (replica-major, step-minor), labeled by head. project_xy keeps (x, y).
ParticleCloud pooled_cloud(const ParallelTrajectory& traj, bool project_xy);
std::vector<ParticleCloud> per_head_clouds(const ParallelTrajectory& traj,
                                           int head_count, bool project_xy);

// Reward for action t of replica i is the pooled-loss contribution of the
// state it produced; the kNN search spans the whole pool, so the nearest
// neighbor may live in another replica. Shape [m * T], replica-major.
std::vector<double> intrinsic_rewards(const ParallelTrajectory& traj, int k,
                                      bool project_xy);

// Cumulative likelihood-ratio weights w_t = exp(sum_{u<=t} log pi - log beta),
// evaluated from the cached pre-squash actions. Shape [m * T].
std::vector<double> importance_weights(const ParallelTrajectory& traj,
                                       const BehaviorSnapshot& behavior,
                                       const MultiHeadPolicy& current);

// Reward-to-go minus the per-step batch-mean baseline, normalized to unit
// standard deviation (left at zero when the spread vanishes).
std::vector<double> advantages_from_rewards(const std::vector<double>& rewards,
                                            int replicas, int horizon);

// Score-function surrogate sum_{i,t} log pi(a|s) * A, value only.
double surrogate(const MultiHeadPolicy& policy, const ParallelTrajectory& traj,
                 const std::vector<double>& advantages);

// Gradient of the surrogate for every parameter, in parameters() order.
std::vector<Tensor> surrogate_gradients(const MultiHeadPolicy& policy,
                                        const ParallelTrajectory& traj,
                                        const std::vector<double>& advantages,
                                        double* surrogate_out = nullptr);

struct UpdateDiagnostics {
  double surrogate = 0.0;
  double grad_norm = 0.0;     // before clipping
  double step_norm = 0.0;     // after clipping, times lr
};

// One ascent step on the whole network: advantages from rewards, single
// backward pass, global-norm clip at 0.5, theta += lr * g.
UpdateDiagnostics update_policy(MultiHeadPolicy& policy, const ParallelTrajectory& traj,
                                const std::vector<double>& rewards, double lr);

struct EpochRecord {
  int epoch = 0;
  double entropy = 0.0;  // nats, pooled projected cloud
  double lr = 0.0;
};

struct TrainResult {
  MultiHeadPolicy policy;
  std::vector<EpochRecord> curve;
  std::vector<double> head_kl;  // final-epoch per-head divergences (empty for 1 head)
  double mean_kl = 0.0;
};

// Full pretraining loop for one seed. on_epoch (optional) sees each record as
// soon as it exists, so a partial curve survives an abort.
TrainResult train(const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace kmyriad
