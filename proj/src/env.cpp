#include "kmyriad/env.hpp"

#include <cmath>
#include <string>

#include "kmyriad/errors.hpp"

namespace kmyriad {

namespace {

// Does the axis-parallel segment from (x, y) to (nx, y) enter a wall or
// leave the arena? Sweeps the whole interval so thin walls cannot be
// tunneled through.
bool x_move_blocked(const TerrainSpec& t, double x, double nx, double y) {
  if (nx < -t.half_width || nx > t.half_width) return true;
  const double lo = x < nx ? x : nx;
  const double hi = x < nx ? nx : x;
  for (const auto& w : t.walls) {
    if (y > w.y0 && y < w.y1 && hi > w.x0 && lo < w.x1) return true;
  }
  return false;
}

bool y_move_blocked(const TerrainSpec& t, double y, double ny, double x) {
  if (ny < -t.half_width || ny > t.half_width) return true;
  const double lo = y < ny ? y : ny;
  const double hi = y < ny ? ny : y;
  for (const auto& w : t.walls) {
    if (x > w.x0 && x < w.x1 && hi > w.y0 && lo < w.y1) return true;
  }
  return false;
}

}  // namespace

ReplicaSet make_replicas(TerrainSpec terrain, int count) {
  terrain.validate();
  if (count <= 0) throw ContractError("replica count must be positive");
  ReplicaSet rs;
  rs.terrain = std::move(terrain);
  rs.count = count;
  rs.pos.assign(static_cast<std::size_t>(count) * 2, 0.0);
  rs.vel.assign(static_cast<std::size_t>(count) * 2, 0.0);
  return rs;
}

void reset_all(ReplicaSet& rs, std::uint64_t seed) {
  rs.terrain.validate();
  for (int i = 0; i < rs.count; ++i) {
    Rng rng = Rng::derive(seed, stream::kReset, static_cast<std::uint64_t>(i));
    double x = 0.0, y = 0.0;
    bool placed = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      x = rs.terrain.spawn_x + rs.jitter_sigma * rng.normal();
      y = rs.terrain.spawn_y + rs.jitter_sigma * rng.normal();
      if (rs.terrain.inside_arena(x, y) && !rs.terrain.blocked(x, y)) {
        placed = true;
        break;
      }
    }
    if (!placed) {
      throw DomainError("reset: jittered spawn stayed blocked after 100 draws (replica " +
                        std::to_string(i) + ")");
    }
    rs.pos[2 * i] = x;
    rs.pos[2 * i + 1] = y;
    rs.vel[2 * i] = 0.0;
    rs.vel[2 * i + 1] = 0.0;
  }
}

void step_all(ReplicaSet& rs, const double* actions) {
  for (int i = 0; i < rs.count; ++i) {
    double ax = actions[2 * i];
    double ay = actions[2 * i + 1];
    if (!std::isfinite(ax) || !std::isfinite(ay)) {
      throw DomainError("step: non-finite action for replica " + std::to_string(i));
    }
    ax = ax < -1.0 ? -1.0 : (ax > 1.0 ? 1.0 : ax);
    ay = ay < -1.0 ? -1.0 : (ay > 1.0 ? 1.0 : ay);

    double vx = rs.vel[2 * i] + ax * rs.accel_max * rs.dt;
    double vy = rs.vel[2 * i + 1] + ay * rs.accel_max * rs.dt;
    const double speed = std::sqrt(vx * vx + vy * vy);
    if (speed > rs.max_speed) {
      const double scale = rs.max_speed / speed;
      vx *= scale;
      vy *= scale;
    }

    const double x = rs.pos[2 * i];
    const double y = rs.pos[2 * i + 1];
    double nx = x + vx * rs.dt;
    if (x_move_blocked(rs.terrain, x, nx, y)) {
      nx = x;
      vx = 0.0;
    }
    double ny = y + vy * rs.dt;
    if (y_move_blocked(rs.terrain, y, ny, nx)) {
      ny = y;
      vy = 0.0;
    }
    rs.pos[2 * i] = nx;
    rs.pos[2 * i + 1] = ny;
    rs.vel[2 * i] = vx;
    rs.vel[2 * i + 1] = vy;
  }
}

ParallelTrajectory rollout(ReplicaSet& rs, const ActionSampler& sampler,
                           const std::vector<int>& head_of_replica, int horizon,
                           std::uint64_t seed, int t_offset) {
  if (static_cast<int>(head_of_replica.size()) != rs.count) {
    throw ContractError("assignment does not cover every replica");
  }
  if (horizon < 0) throw ContractError("negative horizon");
  const int m = rs.count;

  ParallelTrajectory traj;
  traj.replicas = m;
  traj.horizon = horizon;
  traj.states.resize(static_cast<std::size_t>(m) * (horizon + 1) * kStateDim);
  traj.actions.resize(static_cast<std::size_t>(m) * horizon * kActionDim);
  traj.presquash.resize(static_cast<std::size_t>(m) * horizon * kActionDim);
  traj.logp.resize(static_cast<std::size_t>(m) * horizon);
  traj.head_of_replica = head_of_replica;

  std::vector<double> state_rows(static_cast<std::size_t>(m) * kStateDim);
  std::vector<double> actions(static_cast<std::size_t>(m) * kActionDim);
  std::vector<double> presquash(static_cast<std::size_t>(m) * kActionDim);
  std::vector<double> logp(m);
  std::vector<Rng> rngs;
  rngs.reserve(m);

  auto record_states = [&](int t) {
    for (int i = 0; i < m; ++i) {
      double* dst = traj.states.data() +
                    (static_cast<std::size_t>(i) * (horizon + 1) + t) * kStateDim;
      rs.state_row(i, dst);
    }
  };
  record_states(0);

  for (int t = 0; t < horizon; ++t) {
    for (int i = 0; i < m; ++i) rs.state_row(i, state_rows.data() + i * kStateDim);
    rngs.clear();
    for (int i = 0; i < m; ++i) {
      rngs.push_back(Rng::derive(seed, stream::kAction, static_cast<std::uint64_t>(i),
                                 static_cast<std::uint64_t>(t_offset + t)));
    }
    sampler.sample_batch(state_rows.data(), head_of_replica.data(), m, rngs.data(),
                         actions.data(), presquash.data(), logp.data());
    step_all(rs, actions.data());
    record_states(t + 1);
    for (int i = 0; i < m; ++i) {
      double* adst = traj.actions.data() + (static_cast<std::size_t>(i) * horizon + t) * kActionDim;
      double* udst = traj.presquash.data() + (static_cast<std::size_t>(i) * horizon + t) * kActionDim;
      adst[0] = actions[2 * i];
      adst[1] = actions[2 * i + 1];
      udst[0] = presquash[2 * i];
      udst[1] = presquash[2 * i + 1];
      traj.logp[static_cast<std::size_t>(i) * horizon + t] = logp[i];
    }
  }
  return traj;
}

std::vector<long long> occupancy_grid(const ParallelTrajectory& traj, int bins,
                                      double half_width,
                                      std::optional<int> head_filter) {
  if (bins < 1) throw ContractError("occupancy_grid needs bins >= 1");
  std::vector<long long> counts(static_cast<std::size_t>(bins) * bins, 0);
  const double span = 2.0 * half_width;
  for (int i = 0; i < traj.replicas; ++i) {
    if (head_filter && traj.head_of_replica[i] != *head_filter) continue;
    for (int t = 0; t <= traj.horizon; ++t) {
      const double* s = traj.state(i, t);
      int cx = static_cast<int>((s[0] + half_width) / span * bins);
      int cy = static_cast<int>((s[1] + half_width) / span * bins);
      cx = cx < 0 ? 0 : (cx >= bins ? bins - 1 : cx);
      cy = cy < 0 ? 0 : (cy >= bins ? bins - 1 : cy);
      const int row = bins - 1 - cy;
      counts[static_cast<std::size_t>(row) * bins + cx]++;
    }
  }
  return counts;
}

}  // namespace kmyriad
