#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kmyriad/env.hpp"
#include "kmyriad/errors.hpp"
#include "testutil.hpp"

using namespace kmyriad;

namespace {

// emits a fixed action for every replica; logp = 0
struct ConstantSampler : ActionSampler {
  double ax = 0.0, ay = 0.0;
  void sample_batch(const double*, const int*, int rows, Rng*, double* actions,
                    double* presquash, double* logp) const override {
    for (int i = 0; i < rows; ++i) {
      actions[2 * i] = ax;
      actions[2 * i + 1] = ay;
      presquash[2 * i] = 0.0;
      presquash[2 * i + 1] = 0.0;
      logp[i] = 0.0;
    }
  }
};

// uniform random actions from the per-replica streams
struct RandomSampler : ActionSampler {
  void sample_batch(const double*, const int*, int rows, Rng* rngs, double* actions,
                    double* presquash, double* logp) const override {
    for (int i = 0; i < rows; ++i) {
      actions[2 * i] = rngs[i].uniform(-1, 1);
      actions[2 * i + 1] = rngs[i].uniform(-1, 1);
      presquash[2 * i] = actions[2 * i];
      presquash[2 * i + 1] = actions[2 * i + 1];
      logp[i] = 0.0;
    }
  }
};

bool position_legal(const TerrainSpec& t, double x, double y) {
  return t.inside_arena(x, y) && !t.blocked(x, y);
}

}  // namespace

TEST_CASE("terrain presets validate") {
  TerrainSpec::empty().validate();
  TerrainSpec::maze().validate();
  TerrainSpec::corridor().validate();
  CHECK_THROWS_AS(TerrainSpec::by_name("volcano"), ConfigError);

  TerrainSpec bad = TerrainSpec::empty();
  bad.walls = {{-10, 0, 0, 1}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  TerrainSpec trapped = TerrainSpec::empty();
  trapped.walls = {{-1, -1, 1, 1}};  // spawn (0,0) inside
  CHECK_THROWS_AS(trapped.validate(), ConfigError);
}

TEST_CASE("reset is deterministic per seed") {
  auto a = make_replicas(TerrainSpec::empty(), 32);
  auto b = make_replicas(TerrainSpec::empty(), 32);
  reset_all(a, 7);
  reset_all(b, 7);
  CHECK(a.pos == b.pos);
  reset_all(b, 8);
  CHECK(a.pos != b.pos);
}

TEST_CASE("zero jitter puts every replica exactly at spawn") {
  auto rs = make_replicas(TerrainSpec::maze(), 5);
  rs.jitter_sigma = 0.0;
  reset_all(rs, 3);
  for (int i = 0; i < rs.count; ++i) {
    CHECK(rs.pos[2 * i] == rs.terrain.spawn_x);
    CHECK(rs.pos[2 * i + 1] == rs.terrain.spawn_y);
    CHECK(rs.vel[2 * i] == 0.0);
  }
}

TEST_CASE("large reset satisfies terrain invariants") {
  auto rs = make_replicas(TerrainSpec::maze(), 1000);
  reset_all(rs, 123);
  for (int i = 0; i < rs.count; ++i) {
    CHECK(position_legal(rs.terrain, rs.pos[2 * i], rs.pos[2 * i + 1]));
  }
}

TEST_CASE("step kinematics by hand") {
  auto rs = make_replicas(TerrainSpec::empty(), 1);
  rs.jitter_sigma = 0.0;
  reset_all(rs, 0);
  const double actions[2] = {1.0, 0.0};
  step_all(rs, actions);
  CHECK(rs.vel[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rs.vel[1] == 0.0);
  CHECK(rs.pos[0] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rs.pos[1] == 0.0);

  const double bad[2] = {std::nan(""), 0.0};
  CHECK_THROWS_AS(step_all(rs, bad), DomainError);
}

TEST_CASE("speed is clipped to max_speed") {
  auto rs = make_replicas(TerrainSpec::empty(), 1);
  rs.jitter_sigma = 0.0;
  reset_all(rs, 0);
  const double actions[2] = {1.0, 1.0};
  for (int t = 0; t < 50; ++t) {
    step_all(rs, actions);
    const double speed = std::hypot(rs.vel[0], rs.vel[1]);
    CHECK(speed <= rs.max_speed + 1e-12);
  }
}

TEST_CASE("flush wall contact cancels the offending axis") {
  TerrainSpec t = TerrainSpec::empty();
  t.walls = {{1.0, -1.0, 2.0, 1.0}};
  t.validate();
  auto rs = make_replicas(t, 1);
  rs.pos = {1.0, 0.0};  // flush against the wall's left edge
  rs.vel = {0.0, 0.0};
  const double actions[2] = {1.0, 0.0};
  step_all(rs, actions);
  CHECK(rs.pos[0] == 1.0);
  CHECK(rs.vel[0] == 0.0);
}

TEST_CASE("walls cannot be tunneled through") {
  TerrainSpec t = TerrainSpec::empty();
  t.walls = {{1.0, -5.0, 1.05, 5.0}};  // thin vertical wall
  t.validate();
  auto rs = make_replicas(t, 1);
  rs.pos = {0.99, 0.0};
  rs.vel = {1.0, 0.0};  // would move 0.1, far past the wall
  const double actions[2] = {0.0, 0.0};
  step_all(rs, actions);
  CHECK(rs.pos[0] == 0.99);
  CHECK(rs.vel[0] == 0.0);
}

TEST_CASE("replica independence: permuting replicas permutes outputs") {
  auto rs = make_replicas(TerrainSpec::empty(), 8);
  reset_all(rs, 5);
  std::vector<double> actions(16);
  Rng rng(9);
  for (auto& a : actions) a = rng.uniform(-1, 1);

  auto permuted = rs;
  std::vector<int> perm{3, 1, 7, 0, 5, 2, 6, 4};
  std::vector<double> pactions(16);
  for (int i = 0; i < 8; ++i) {
    permuted.pos[2 * i] = rs.pos[2 * perm[i]];
    permuted.pos[2 * i + 1] = rs.pos[2 * perm[i] + 1];
    permuted.vel[2 * i] = rs.vel[2 * perm[i]];
    permuted.vel[2 * i + 1] = rs.vel[2 * perm[i] + 1];
    pactions[2 * i] = actions[2 * perm[i]];
    pactions[2 * i + 1] = actions[2 * perm[i] + 1];
  }
  step_all(rs, actions.data());
  step_all(permuted, pactions.data());
  for (int i = 0; i < 8; ++i) {
    CHECK(permuted.pos[2 * i] == rs.pos[2 * perm[i]]);
    CHECK(permuted.pos[2 * i + 1] == rs.pos[2 * perm[i] + 1]);
    CHECK(permuted.vel[2 * i] == rs.vel[2 * perm[i]]);
  }
}

TEST_CASE("single-replica replay matches the batched step") {
  auto rs = make_replicas(TerrainSpec::maze(), 6);
  reset_all(rs, 31);
  std::vector<double> actions(12);
  Rng rng(4);
  for (auto& a : actions) a = rng.uniform(-1, 1);

  auto solo = make_replicas(TerrainSpec::maze(), 1);
  solo.pos = {rs.pos[6], rs.pos[7]};
  solo.vel = {rs.vel[6], rs.vel[7]};
  const double sact[2] = {actions[6], actions[7]};

  step_all(rs, actions.data());
  step_all(solo, sact);
  CHECK(solo.pos[0] == rs.pos[6]);
  CHECK(solo.pos[1] == rs.pos[7]);
  CHECK(solo.vel[0] == rs.vel[6]);
  CHECK(solo.vel[1] == rs.vel[7]);
}

TEST_CASE("rollout with a null policy keeps replicas at their spawns") {
  auto rs = make_replicas(TerrainSpec::empty(), 4);
  reset_all(rs, 11);
  const auto spawn = rs.pos;
  ConstantSampler still;
  const auto traj = rollout(rs, still, {0, 0, 0, 0}, 20, 99);
  for (int i = 0; i < 4; ++i) {
    for (int t = 0; t <= 20; ++t) {
      CHECK(traj.state(i, t)[0] == spawn[2 * i]);
      CHECK(traj.state(i, t)[1] == spawn[2 * i + 1]);
    }
  }
}

TEST_CASE("rollout shape contract") {
  auto rs = make_replicas(TerrainSpec::empty(), 3);
  reset_all(rs, 1);
  RandomSampler sampler;
  const auto traj = rollout(rs, sampler, {0, 1, 0}, 7, 2);
  CHECK(traj.states.size() == 3u * 8u * 4u);
  CHECK(traj.actions.size() == 3u * 7u * 2u);
  CHECK(traj.logp.size() == 3u * 7u);
  CHECK(traj.head_of_replica == std::vector<int>{0, 1, 0});

  std::vector<int> short_assignment{0, 1};
  CHECK_THROWS_AS(rollout(rs, sampler, short_assignment, 7, 2), ContractError);
}

TEST_CASE("markov property: suffix replay from a saved mid-episode state") {
  RandomSampler sampler;
  const std::vector<int> heads{0, 0, 0, 0, 0};

  auto full = make_replicas(TerrainSpec::maze(), 5);
  reset_all(full, 77);
  const auto whole = rollout(full, sampler, heads, 30, 1234);

  auto prefix = make_replicas(TerrainSpec::maze(), 5);
  reset_all(prefix, 77);
  rollout(prefix, sampler, heads, 10, 1234);
  const auto suffix = rollout(prefix, sampler, heads, 20, 1234, /*t_offset=*/10);

  for (int i = 0; i < 5; ++i) {
    for (int t = 0; t <= 20; ++t) {
      const double* a = whole.state(i, 10 + t);
      const double* b = suffix.state(i, t);
      for (int j = 0; j < kStateDim; ++j) CHECK(a[j] == b[j]);
    }
  }
}

TEST_CASE("terrain safety under long random action sequences") {
  for (const auto& terrain : {TerrainSpec::maze(), TerrainSpec::corridor()}) {
    auto rs = make_replicas(terrain, 16);
    reset_all(rs, 2024);
    RandomSampler sampler;
    const auto traj = rollout(rs, sampler, std::vector<int>(16, 0), 300, 5);
    for (int i = 0; i < 16; ++i) {
      for (int t = 0; t <= 300; ++t) {
        const double* s = traj.state(i, t);
        CHECK(position_legal(terrain, s[0], s[1]));
      }
    }
  }
}

TEST_CASE("occupancy grid counts") {
  auto rs = make_replicas(TerrainSpec::empty(), 1);
  rs.jitter_sigma = 0.0;
  reset_all(rs, 0);
  ConstantSampler still;
  const auto traj = rollout(rs, still, {0}, 10, 0);
  const auto grid = occupancy_grid(traj, 11, 5.0);
  long long total = 0, nonzero = 0;
  for (long long c : grid) {
    total += c;
    nonzero += c > 0;
  }
  CHECK(total == 11);  // T + 1 visits
  CHECK(nonzero == 1);
  CHECK_THROWS_AS(occupancy_grid(traj, 0, 5.0), ContractError);
}

TEST_CASE("occupancy head filter partitions total counts") {
  auto rs = make_replicas(TerrainSpec::empty(), 6);
  reset_all(rs, 8);
  RandomSampler sampler;
  const std::vector<int> heads{0, 1, 0, 2, 1, 0};
  const auto traj = rollout(rs, sampler, heads, 25, 3);
  const auto all = occupancy_grid(traj, 16, 5.0);
  std::vector<long long> merged(all.size(), 0);
  for (int h = 0; h < 3; ++h) {
    const auto part = occupancy_grid(traj, 16, 5.0, h);
    for (std::size_t c = 0; c < merged.size(); ++c) merged[c] += part[c];
  }
  CHECK(merged == all);
}

TEST_CASE("occupancy of uniform samples stays within 5 sigma per cell") {
  // synthetic trajectory with i.i.d. uniform positions
  ParallelTrajectory traj;
  traj.replicas = 1;
  traj.horizon = 39999;
  traj.head_of_replica = {0};
  Rng rng(606);
  traj.states.resize(static_cast<std::size_t>(traj.horizon + 1) * kStateDim);
  for (int t = 0; t <= traj.horizon; ++t) {
    traj.states[t * kStateDim + 0] = rng.uniform(-5, 5);
    traj.states[t * kStateDim + 1] = rng.uniform(-5, 5);
  }
  const int bins = 5;
  const auto grid = occupancy_grid(traj, bins, 5.0);
  const double n = traj.horizon + 1;
  const double p = 1.0 / (bins * bins);
  const double sigma = std::sqrt(n * p * (1 - p));
  for (long long c : grid) {
    CHECK(std::abs(c - n * p) <= 5.0 * sigma);
  }
}
