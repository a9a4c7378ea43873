#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kmyriad/rng.hpp"
#include "kmyriad/terrain.hpp"

namespace kmyriad {

inline constexpr int kStateDim = 4;   // x, y, vx, vy
inline constexpr int kActionDim = 2;  // planar acceleration command

// m identical, independent double-integrator point masses stepped in
// lockstep. Replica i never reads or writes replica j's state.
struct ReplicaSet {
  TerrainSpec terrain;
  int count = 0;
  double dt = 0.1;          // seconds per step
  double max_speed = 1.0;   // m/s, Euclidean clip
  double accel_max = 1.0;   // m/s^2 per unit action
  double jitter_sigma = 0.05;
  std::vector<double> pos;  // [count * 2]
  std::vector<double> vel;  // [count * 2]

  void state_row(int i, double* out4) const {
    out4[0] = pos[2 * i];
    out4[1] = pos[2 * i + 1];
    out4[2] = vel[2 * i];
    out4[3] = vel[2 * i + 1];
  }
};

ReplicaSet make_replicas(TerrainSpec terrain, int count);

// Every replica to the spawn point plus independent Gaussian jitter, zero
// velocity. Deterministic per seed; per-replica streams.
void reset_all(ReplicaSet& rs, std::uint64_t seed);

// One kinematics step for all replicas. Actions are clamped to [-1, 1];
// non-finite components raise DomainError. Wall and arena intersections are
// resolved per axis (x with the old y, then y with the new x): the offending
// axis move is cancelled and that velocity component zeroed.
void step_all(ReplicaSet& rs, const double* actions);

// States, actions, and behavior log-densities for every replica over one
// episode. `presquash` caches the pre-tanh action values so densities can be
// re-evaluated later without inverting the squash.
struct ParallelTrajectory {
  int replicas = 0;
  int horizon = 0;
  std::vector<double> states;     // [m, T+1, 4]
  std::vector<double> actions;    // [m, T, 2]
  std::vector<double> presquash;  // [m, T, 2]
  std::vector<double> logp;       // [m, T]
  std::vector<int> head_of_replica;  // [m]

  const double* state(int i, int t) const {
    return states.data() + (static_cast<std::size_t>(i) * (horizon + 1) + t) * kStateDim;
  }
  const double* action(int i, int t) const {
    return actions.data() + (static_cast<std::size_t>(i) * horizon + t) * kActionDim;
  }
  const double* presquash_at(int i, int t) const {
    return presquash.data() + (static_cast<std::size_t>(i) * horizon + t) * kActionDim;
  }
  double logp_at(int i, int t) const {
    return logp[static_cast<std::size_t>(i) * horizon + t];
  }
};

// Per-step action source for rollouts. Implementations must draw all
// randomness for row i from rngs[i] so replicas stay independent.
struct ActionSampler {
  virtual ~ActionSampler() = default;
  virtual void sample_batch(const double* states, const int* heads, int rows,
                            Rng* rngs, double* actions, double* presquash,
                            double* logp) const = 0;
};

// T steps under each replica's assigned head. Step t of replica i draws from
// the stream (seed, kAction, i, t_offset + t), so a suffix can be replayed
// exactly from a saved mid-episode ReplicaSet.
ParallelTrajectory rollout(ReplicaSet& rs, const ActionSampler& sampler,
                           const std::vector<int>& head_of_replica, int horizon,
                           std::uint64_t seed, int t_offset = 0);

// Visit counts over a bins x bins grid covering the arena; row 0 is the top
// (highest y). Counts every stored state (T+1 per replica), optionally only
// for replicas driven by one head.
std::vector<long long> occupancy_grid(const ParallelTrajectory& traj, int bins,
                                      double half_width,
                                      std::optional<int> head_filter = std::nullopt);

}  // namespace kmyriad
