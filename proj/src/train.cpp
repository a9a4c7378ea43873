#include "kmyriad/train.hpp"

#include <cmath>
#include <string>

#include "kmyriad/errors.hpp"
#include "kmyriad/tape.hpp"

namespace kmyriad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;
constexpr double kGradClip = 0.5;

double log_one_minus_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * (0.6931471805599453 - a - std::log1p(std::exp(-2.0 * a)));
}

// theta-independent per-row additive terms of the squashed log-density
double row_constant(const double* u, int da, double half_span) {
  double acc = 0.0;
  for (int j = 0; j < da; ++j) {
    acc += -0.5 * kLogTwoPi - log_one_minus_tanh_sq(u[j]) - std::log(half_span);
  }
  return acc;
}

}  // namespace

Assignment assign(int m_env, int heads) {
  if (heads < 1 || m_env < 1) throw ContractError("assign: counts must be positive");
  if (heads > m_env) {
    throw ContractError("assign: " + std::to_string(heads) + " heads exceed " +
                        std::to_string(m_env) + " replicas");
  }
  Assignment a;
  a.head_count = heads;
  a.head_of_replica.reserve(m_env);
  const int q = m_env / heads;
  const int r = m_env % heads;
  for (int h = 0; h < heads; ++h) {
    const int block = q + (h < r ? 1 : 0);
    for (int i = 0; i < block; ++i) a.head_of_replica.push_back(h);
  }
  return a;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (lr < 0.0) throw ConfigError("learning rate must be non-negative");
  if (lr_decay <= 0.0) throw ConfigError("lr decay factor must be positive");
  if (k < 1) throw ConfigError("k must be positive");
  if (envs < 1) throw ConfigError("env count must be positive");
  if (heads < 1 || heads > envs) throw ConfigError("need 1 <= heads <= envs");
  if (horizon < 1) throw ConfigError("horizon must be positive");
  terrain.validate();
}

ParticleCloud pooled_cloud(const ParallelTrajectory& traj, bool project_xy) {
  ParticleCloud cloud;
  cloud.dim = project_xy ? 2 : kStateDim;
  cloud.points.reserve(static_cast<std::size_t>(traj.replicas) * traj.horizon * cloud.dim);
  cloud.labels.reserve(static_cast<std::size_t>(traj.replicas) * traj.horizon);
  for (int i = 0; i < traj.replicas; ++i) {
    for (int t = 1; t <= traj.horizon; ++t) {
      const double* s = traj.state(i, t);
      cloud.points.insert(cloud.points.end(), s, s + cloud.dim);
      cloud.labels.push_back(traj.head_of_replica[i]);
    }
  }
  return cloud;
}

std::vector<ParticleCloud> per_head_clouds(const ParallelTrajectory& traj,
                                           int head_count, bool project_xy) {
  std::vector<ParticleCloud> out(head_count);
  for (auto& c : out) c.dim = project_xy ? 2 : kStateDim;
  for (int i = 0; i < traj.replicas; ++i) {
    const int h = traj.head_of_replica[i];
    if (h < 0 || h >= head_count) throw ContractError("trajectory head label out of range");
    for (int t = 1; t <= traj.horizon; ++t) {
      const double* s = traj.state(i, t);
      out[h].points.insert(out[h].points.end(), s, s + out[h].dim);
    }
  }
  return out;
}

std::vector<double> intrinsic_rewards(const ParallelTrajectory& traj, int k,
                                      bool project_xy) {
  const ParticleCloud pool = pooled_cloud(traj, project_xy);
  // pool order is replica-major, step-minor, so the per-particle losses are
  // already reward[i * T + t] for the action taken at step t
  return particle_loss(pool, k).second;
}

std::vector<double> importance_weights(const ParallelTrajectory& traj,
                                       const BehaviorSnapshot& behavior,
                                       const MultiHeadPolicy& current) {
  const int m = traj.replicas;
  const int horizon = traj.horizon;
  if (behavior.policy.head_count() != current.head_count() ||
      behavior.policy.dims().state_dim != current.dims().state_dim ||
      behavior.policy.dims().action_dim != current.dims().action_dim) {
    throw ContractError("behavior and current policies disagree on structure");
  }
  const int da = current.dims().action_dim;
  const std::size_t rows = static_cast<std::size_t>(m) * horizon;

  std::vector<double> states(rows * kStateDim);
  std::vector<int> heads(rows);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const std::size_t r = static_cast<std::size_t>(i) * horizon + t;
      const double* s = traj.state(i, t);
      std::copy(s, s + kStateDim, states.data() + r * kStateDim);
      heads[r] = traj.head_of_replica[i];
    }
  }
  std::vector<double> cur_mean(rows * da), cur_ls(rows * da);
  std::vector<double> beh_mean(rows * da), beh_ls(rows * da);
  current.forward(states.data(), heads.data(), static_cast<int>(rows),
                  cur_mean.data(), cur_ls.data());
  behavior.policy.forward(states.data(), heads.data(), static_cast<int>(rows),
                          beh_mean.data(), beh_ls.data());

  std::vector<double> weights(rows);
  for (int i = 0; i < m; ++i) {
    double cum = 0.0;
    for (int t = 0; t < horizon; ++t) {
      const std::size_t r = static_cast<std::size_t>(i) * horizon + t;
      const double* u = traj.presquash_at(i, t);
      const double lcur = current.logp_from_presquash(cur_mean.data() + r * da,
                                                      cur_ls.data() + r * da, u);
      const double lbeh = behavior.policy.logp_from_presquash(
          beh_mean.data() + r * da, beh_ls.data() + r * da, u);
      cum += lcur - lbeh;
      const double w = std::exp(cum);
      if (!std::isfinite(w)) {
        throw NumericError("importance weight overflow at replica " +
                           std::to_string(i) + ", step " + std::to_string(t));
      }
      weights[r] = w;
    }
  }
  return weights;
}

std::vector<double> advantages_from_rewards(const std::vector<double>& rewards,
                                            int replicas, int horizon) {
  if (rewards.size() != static_cast<std::size_t>(replicas) * horizon) {
    throw DimensionError("reward buffer does not match replicas * horizon");
  }
  std::vector<double> g(rewards.size());
  for (int i = 0; i < replicas; ++i) {
    double acc = 0.0;
    for (int t = horizon - 1; t >= 0; --t) {
      acc += rewards[static_cast<std::size_t>(i) * horizon + t];
      g[static_cast<std::size_t>(i) * horizon + t] = acc;
    }
  }
  // per-step baseline across the batch of replicas
  std::vector<double> adv(g.size());
  for (int t = 0; t < horizon; ++t) {
    double b = 0.0;
    for (int i = 0; i < replicas; ++i) b += g[static_cast<std::size_t>(i) * horizon + t];
    b /= replicas;
    for (int i = 0; i < replicas; ++i) {
      const std::size_t r = static_cast<std::size_t>(i) * horizon + t;
      adv[r] = g[r] - b;
    }
  }
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(adv.size()));
  if (sd > 1e-12) {
    for (double& a : adv) a = (a - mean) / sd;
  }
  return adv;
}

namespace {

struct HeadRows {
  std::vector<double> states;     // [B, d_s]
  std::vector<double> presquash;  // [B, d_a]
  std::vector<double> adv;        // [B, 1]
  std::vector<double> row_const;  // [B, 1]
  int rows = 0;
};

std::vector<HeadRows> split_by_head(const MultiHeadPolicy& policy,
                                    const ParallelTrajectory& traj,
                                    const std::vector<double>& advantages) {
  const int da = policy.dims().action_dim;
  const double half_span = 0.5 * (policy.act_high() - policy.act_low());
  std::vector<HeadRows> out(policy.head_count());
  for (int i = 0; i < traj.replicas; ++i) {
    const int h = traj.head_of_replica[i];
    HeadRows& dst = out[h];
    for (int t = 0; t < traj.horizon; ++t) {
      const double* s = traj.state(i, t);
      const double* u = traj.presquash_at(i, t);
      dst.states.insert(dst.states.end(), s, s + kStateDim);
      dst.presquash.insert(dst.presquash.end(), u, u + da);
      dst.adv.push_back(advantages[static_cast<std::size_t>(i) * traj.horizon + t]);
      dst.row_const.push_back(row_constant(u, da, half_span));
      dst.rows++;
    }
  }
  return out;
}

}  // namespace

double surrogate(const MultiHeadPolicy& policy, const ParallelTrajectory& traj,
                 const std::vector<double>& advantages) {
  const int m = traj.replicas;
  const int horizon = traj.horizon;
  const int da = policy.dims().action_dim;
  const std::size_t rows = static_cast<std::size_t>(m) * horizon;
  std::vector<double> states(rows * kStateDim);
  std::vector<int> heads(rows);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const std::size_t r = static_cast<std::size_t>(i) * horizon + t;
      const double* s = traj.state(i, t);
      std::copy(s, s + kStateDim, states.data() + r * kStateDim);
      heads[r] = traj.head_of_replica[i];
    }
  }
  std::vector<double> mean(rows * da), ls(rows * da);
  policy.forward(states.data(), heads.data(), static_cast<int>(rows), mean.data(),
                 ls.data());
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const std::size_t r = static_cast<std::size_t>(i) * horizon + t;
      const double lp = policy.logp_from_presquash(mean.data() + r * da,
                                                   ls.data() + r * da,
                                                   traj.presquash_at(i, t));
      acc += lp * advantages[r];
    }
  }
  return acc;
}

std::vector<Tensor> surrogate_gradients(const MultiHeadPolicy& policy,
                                        const ParallelTrajectory& traj,
                                        const std::vector<double>& advantages,
                                        double* surrogate_out) {
  const int da = policy.dims().action_dim;
  const auto by_head = split_by_head(policy, traj, advantages);

  Tape tape;
  auto lifted = policy.lift(tape);
  Value total = tape.constant(Tensor::scalar(0.0));
  for (int h = 0; h < policy.head_count(); ++h) {
    const HeadRows& hr = by_head[h];
    if (hr.rows == 0) continue;
    Value states = tape.constant(Tensor({hr.rows, kStateDim}, hr.states));
    Value u = tape.constant(Tensor({hr.rows, da}, hr.presquash));
    Value adv = tape.constant(Tensor({hr.rows, 1}, hr.adv));
    Value row_const = tape.constant(Tensor({hr.rows, 1}, hr.row_const));

    auto [mean, logstd] = policy.head_graph(tape, lifted, h, states);
    Value inv_sigma = tape.exp(tape.mulc(logstd, -1.0));
    Value z = tape.mul(tape.sub(u, mean), inv_sigma);
    Value terms = tape.sub(tape.mulc(tape.mul(z, z), -0.5), logstd);
    Value row_logp = tape.add(tape.row_sum(terms), row_const);
    total = tape.add(total, tape.sum(tape.mul(row_logp, adv)));
  }
  if (surrogate_out) *surrogate_out = total.item();

  Gradients grads = tape.backward(total);
  std::vector<Tensor> out;
  out.reserve(lifted.params.size());
  for (const Value& p : lifted.params) out.push_back(grads.of(p));
  return out;
}

UpdateDiagnostics update_policy(MultiHeadPolicy& policy, const ParallelTrajectory& traj,
                                const std::vector<double>& rewards, double lr) {
  UpdateDiagnostics diag;
  const auto adv = advantages_from_rewards(rewards, traj.replicas, traj.horizon);
  const auto grads = surrogate_gradients(policy, traj, adv, &diag.surrogate);

  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (std::int64_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm) || !std::isfinite(diag.surrogate)) {
    throw NumericError("non-finite gradient; epoch aborted");
  }
  diag.grad_norm = norm;
  const double scale = norm > kGradClip ? kGradClip / norm : 1.0;
  diag.step_norm = lr * scale * norm;

  auto params = policy.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    const Tensor& g = grads[p];
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] += lr * scale * g[i];
  }
  return diag;
}

TrainResult train(const TrainConfig& config, std::uint64_t seed,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const Assignment asn = assign(config.envs, config.heads);
  MultiHeadPolicy policy(config.policy_dims, config.heads, config.act_low,
                         config.act_high, derive_seed(seed, stream::kInit));
  ReplicaSet rs = make_replicas(config.terrain, config.envs);

  TrainResult result{policy, {}, {}, 0.0};
  double lr = config.lr;
  ParallelTrajectory last_traj;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (int ms : config.lr_milestones) {
      if (epoch == ms && epoch > 0) lr *= config.lr_decay;
    }
    const BehaviorSnapshot behavior(policy);
    const std::uint64_t env_seed = derive_seed(seed, stream::kEpoch, epoch);
    reset_all(rs, env_seed);
    ParallelTrajectory traj =
        rollout(rs, behavior.policy, asn.head_of_replica, config.horizon, env_seed);
    const auto rewards = intrinsic_rewards(traj, config.k, config.project_xy);
    if (lr > 0.0) {
      update_policy(policy, traj, rewards, lr);
    }
    // curve entropy: Eq.-1 estimator over the support of the pooled cloud;
    // identical to the raw pooled estimate whenever no state repeats exactly
    const ParticleCloud support = deduplicate(pooled_cloud(traj, config.project_xy));
    const double entropy = entropy_knn(support, config.k).value;
    EpochRecord rec{epoch, entropy, lr};
    if (on_epoch) on_epoch(rec);
    result.curve.push_back(rec);
    last_traj = std::move(traj);
  }

  result.policy = policy;
  if (config.epochs > 0 && config.heads >= 2) {
    auto clouds = per_head_clouds(last_traj, config.heads, config.project_xy);
    for (auto& c : clouds) c = deduplicate(c);
    result.head_kl.resize(config.heads);
    double acc = 0.0;
    for (int h = 0; h < config.heads; ++h) {
      ParticleCloud rest;
      rest.dim = clouds[h].dim;
      for (int o = 0; o < config.heads; ++o) {
        if (o == h) continue;
        rest.points.insert(rest.points.end(), clouds[o].points.begin(),
                           clouds[o].points.end());
      }
      result.head_kl[h] = kl_knn(clouds[h], rest, config.k);
      acc += result.head_kl[h];
    }
    result.mean_kl = acc / config.heads;
  }
  return result;
}

}  // namespace kmyriad
