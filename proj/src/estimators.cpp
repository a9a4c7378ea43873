#include "kmyriad/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_set>

#include "kmyriad/kdtree.hpp"
#include "kmyriad/threading.hpp"

namespace kmyriad {

namespace {

std::string first_indices(const std::vector<int>& idx, std::size_t cap = 8) {
  std::string s;
  for (std::size_t i = 0; i < idx.size() && i < cap; ++i) {
    if (i) s += ",";
    s += std::to_string(idx[i]);
  }
  if (idx.size() > cap) s += ",...";
  return s;
}

void check_k(const ParticleCloud& cloud, int k) {
  cloud.validate();
  const int n = cloud.count();
  if (k < 1) throw ContractError("k must be positive");
  if (k > n - 1) {
    throw ContractError("k=" + std::to_string(k) + " needs at least " +
                        std::to_string(k + 1) + " points, cloud has " + std::to_string(n));
  }
}

// k-th neighbor distance per point, and optionally the k neighbor indices.
void knn_all(const ParticleCloud& cloud, int k, std::vector<double>& kth,
             std::vector<int>* neighbors) {
  const int n = cloud.count();
  KdTree tree(cloud.points.data(), n, cloud.dim);
  kth.assign(n, 0.0);
  if (neighbors) neighbors->assign(static_cast<std::size_t>(n) * k, -1);
  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    std::vector<Neighbor> found;
    for (std::int64_t i = begin; i < end; ++i) {
      tree.knn(cloud.point(static_cast<int>(i)), k, static_cast<int>(i), found);
      kth[i] = std::sqrt(found[k - 1].dist2);
      if (neighbors) {
        for (int j = 0; j < k; ++j) (*neighbors)[i * k + j] = found[j].index;
      }
    }
  });
}

std::vector<int> zero_radius_indices(const std::vector<double>& kth) {
  std::vector<int> bad;
  for (std::size_t i = 0; i < kth.size(); ++i) {
    if (kth[i] == 0.0) bad.push_back(static_cast<int>(i));
  }
  return bad;
}

}  // namespace

void ParticleCloud::validate() const {
  if (dim <= 0) throw ContractError("particle cloud with non-positive dimension");
  if (points.size() % dim != 0) {
    throw DimensionError("point buffer size not a multiple of dim");
  }
  for (double v : points) {
    if (!std::isfinite(v)) throw NumericError("non-finite particle coordinate");
  }
  const std::size_t n = points.size() / dim;
  if (!weights.empty()) {
    if (weights.size() != n) throw DimensionError("weight count != particle count");
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("weights must be strictly positive");
    }
  }
  if (!labels.empty() && labels.size() != n) {
    throw DimensionError("label count != particle count");
  }
}

ParticleCloud make_cloud(int dim, std::vector<double> points) {
  ParticleCloud c;
  c.dim = dim;
  c.points = std::move(points);
  c.validate();
  return c;
}

ParticleCloud deduplicate(const ParticleCloud& cloud) {
  cloud.validate();
  struct RowHash {
    const ParticleCloud* c;
    std::size_t operator()(int i) const {
      std::size_t h = 1469598103934665603ULL;
      const double* p = c->point(i);
      for (int j = 0; j < c->dim; ++j) {
        std::uint64_t bits;
        std::memcpy(&bits, &p[j], sizeof bits);
        h = (h ^ bits) * 1099511628211ULL;
      }
      return h;
    }
  };
  struct RowEq {
    const ParticleCloud* c;
    bool operator()(int a, int b) const {
      return std::memcmp(c->point(a), c->point(b), sizeof(double) * c->dim) == 0;
    }
  };
  std::unordered_set<int, RowHash, RowEq> seen(16, RowHash{&cloud}, RowEq{&cloud});
  ParticleCloud out;
  out.dim = cloud.dim;
  for (int i = 0; i < cloud.count(); ++i) {
    if (!seen.insert(i).second) continue;
    const double* p = cloud.point(i);
    out.points.insert(out.points.end(), p, p + cloud.dim);
    if (!cloud.weights.empty()) out.weights.push_back(cloud.weights[i]);
    if (!cloud.labels.empty()) out.labels.push_back(cloud.labels[i]);
  }
  return out;
}

double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma requires x > 0");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // asymptotic series through x^-12; error < 1e-15 for x >= 10
  double series = std::log(x) - 0.5 * inv;
  series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 -
            inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
  return acc + series;
}

double ball_volume(int dim, double radius) {
  if (dim <= 0) throw ContractError("ball_volume requires positive dimension");
  if (radius < 0.0) throw DomainError("ball_volume requires non-negative radius");
  const double half = 0.5 * dim;
  return std::pow(M_PI, half) / std::tgamma(half + 1.0) * std::pow(radius, dim);
}

std::vector<double> knn_distances(const ParticleCloud& cloud, int k) {
  check_k(cloud, k);
  std::vector<double> kth;
  knn_all(cloud, k, kth, nullptr);
  return kth;
}

std::vector<double> knn_distances_bruteforce(const ParticleCloud& cloud, int k) {
  check_k(cloud, k);
  const int n = cloud.count();
  std::vector<double> kth(n);
  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    std::vector<Neighbor> all;
    for (std::int64_t i = begin; i < end; ++i) {
      all.clear();
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        all.push_back({squared_distance(cloud.point(static_cast<int>(i)), cloud.point(j), cloud.dim), j});
      }
      std::nth_element(all.begin(), all.begin() + (k - 1), all.end());
      kth[i] = std::sqrt(all[k - 1].dist2);
    }
  });
  return kth;
}

EntropyEstimate entropy_knn(const ParticleCloud& cloud, int k) {
  check_k(cloud, k);
  const int n = cloud.count();
  std::vector<double> kth;
  knn_all(cloud, k, kth, nullptr);
  const auto bad = zero_radius_indices(kth);
  if (!bad.empty()) {
    throw DegenerateRadiusError(
        "entropy_knn: zero k-th neighbor distance at indices [" + first_indices(bad) + "]", bad);
  }
  EntropyEstimate est;
  est.k = k;
  est.contributions.resize(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double vi = ball_volume(cloud.dim, kth[i]);
    est.contributions[i] = std::log(static_cast<double>(k) / (static_cast<double>(n) * vi));
    mean += est.contributions[i];
  }
  mean /= n;
  est.value = -mean + std::log(static_cast<double>(k)) - digamma(k);
  return est;
}

std::pair<double, std::vector<double>> particle_loss(const ParticleCloud& cloud, int k) {
  check_k(cloud, k);
  std::vector<double> kth;
  knn_all(cloud, k, kth, nullptr);
  std::vector<double> per(kth.size());
  double total = 0.0;
  for (std::size_t i = 0; i < kth.size(); ++i) {
    per[i] = cloud.dim * std::log(std::max(kth[i], kDistanceFloor));
    total += per[i];
  }
  return {total, std::move(per)};
}

EntropyEstimate weighted_entropy(const ParticleCloud& cloud, int k) {
  check_k(cloud, k);
  if (cloud.weights.empty()) {
    throw ContractError("weighted_entropy requires per-particle weights");
  }
  const int n = cloud.count();
  double wsum = 0.0;
  for (double w : cloud.weights) wsum += w;
  std::vector<double> norm(n);
  for (int i = 0; i < n; ++i) norm[i] = cloud.weights[i] / wsum;

  std::vector<double> kth;
  std::vector<int> neighbors;
  knn_all(cloud, k, kth, &neighbors);
  const auto bad = zero_radius_indices(kth);
  if (!bad.empty()) {
    throw DegenerateRadiusError(
        "weighted_entropy: zero k-th neighbor distance at indices [" + first_indices(bad) + "]", bad);
  }
  EntropyEstimate est;
  est.k = k;
  est.contributions.resize(n);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    double wj = 0.0;
    for (int j = 0; j < k; ++j) wj += norm[neighbors[static_cast<std::size_t>(i) * k + j]];
    const double vj = ball_volume(cloud.dim, kth[i]);
    est.contributions[i] = wj * std::log(wj / vj);
    mean += est.contributions[i];
  }
  mean /= n;
  est.value = -mean + std::log(static_cast<double>(k)) - digamma(k);
  return est;
}

double kl_knn(const ParticleCloud& p, const ParticleCloud& q, int k) {
  p.validate();
  q.validate();
  if (p.dim != q.dim) throw DimensionError("kl_knn clouds must share dimension");
  const int n = p.count();
  const int m = q.count();
  if (k < 1 || k > n - 1 || k > m) {
    throw ContractError("kl_knn requires k <= min(n-1, m)");
  }
  std::vector<double> rho;
  knn_all(p, k, rho, nullptr);

  KdTree qtree(q.points.data(), m, q.dim);
  std::vector<double> nu(n);
  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    std::vector<Neighbor> found;
    for (std::int64_t i = begin; i < end; ++i) {
      qtree.knn(p.point(static_cast<int>(i)), k, -1, found);
      nu[i] = std::sqrt(found[k - 1].dist2);
    }
  });

  std::vector<int> bad = zero_radius_indices(rho);
  const auto bad_nu = zero_radius_indices(nu);
  bad.insert(bad.end(), bad_nu.begin(), bad_nu.end());
  if (!bad.empty()) {
    throw DegenerateRadiusError(
        "kl_knn: zero neighbor distance at indices [" + first_indices(bad) + "]", bad);
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::log(nu[i] / rho[i]);
  return static_cast<double>(p.dim) / n * acc +
         std::log(static_cast<double>(m) / (n - 1));
}

double pairwise_diversity(const std::vector<ParticleCloud>& per_head, int k) {
  if (per_head.size() < 2) {
    throw ContractError("pairwise_diversity needs at least 2 heads");
  }
  for (const auto& c : per_head) {
    if (c.count() == 0) throw ContractError("pairwise_diversity: empty head cloud");
  }
  double acc = 0.0;
  for (std::size_t h = 0; h < per_head.size(); ++h) {
    ParticleCloud rest;
    rest.dim = per_head[h].dim;
    for (std::size_t o = 0; o < per_head.size(); ++o) {
      if (o == h) continue;
      rest.points.insert(rest.points.end(), per_head[o].points.begin(),
                         per_head[o].points.end());
    }
    acc += kl_knn(per_head[h], rest, k);
  }
  return acc / static_cast<double>(per_head.size());
}

}  // namespace kmyriad
