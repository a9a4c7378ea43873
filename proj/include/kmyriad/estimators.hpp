#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "kmyriad/errors.hpp"

namespace kmyriad {

// Pooled state samples; the substrate of every entropy/KL estimate.
struct ParticleCloud {
  int dim = 0;
  std::vector<double> points;   // [count * dim], row-major
  std::vector<double> weights;  // empty, or one strictly positive weight per point
  std::vector<int> labels;      // empty, or one source label per point

  int count() const {
    return dim > 0 ? static_cast<int>(points.size()) / dim : 0;
  }
  const double* point(int i) const { return points.data() + static_cast<std::size_t>(i) * dim; }
  // Checks dimension consistency, finiteness, and weight positivity.
  void validate() const;
};

ParticleCloud make_cloud(int dim, std::vector<double> points);

// Collapse bitwise-identical points, keeping the first occurrence (and its
// weight/label). On duplicate-free clouds this is the identity.
ParticleCloud deduplicate(const ParticleCloud& cloud);

// Digamma via upward recurrence to x >= 10 plus the asymptotic series;
// absolute error below 1e-10 on the positive axis.
double digamma(double x);

// Volume of the d-ball of radius r: pi^{d/2} / Gamma(d/2 + 1) * r^d.
double ball_volume(int dim, double radius);

// Distance from each point to its k-th nearest other point. The accelerated
// index agrees with the brute-force reference bit for bit.
std::vector<double> knn_distances(const ParticleCloud& cloud, int k);
std::vector<double> knn_distances_bruteforce(const ParticleCloud& cloud, int k);

struct EntropyEstimate {
  double value = 0.0;  // nats
  int k = 0;
  // Per-particle contributions; value = -mean(contributions) + ln k - digamma(k).
  std::vector<double> contributions;
};

// k-NN differential entropy with digamma bias correction. Undefined (throws
// DegenerateRadiusError) when any k-th neighbor distance is exactly zero; no
// epsilon smoothing here.
EntropyEstimate entropy_knn(const ParticleCloud& cloud, int k);

// Training surrogate: per-particle d * ln(max(R_i, kDistanceFloor)) and its
// sum. The floor applies only here, never to entropy_knn.
inline constexpr double kDistanceFloor = 1e-8;
std::pair<double, std::vector<double>> particle_loss(const ParticleCloud& cloud, int k);

// Weighted estimator: contributions W_j * ln(W_j / V_j) with W_j the summed
// (normalized) weights of the k nearest neighbors of j.
EntropyEstimate weighted_entropy(const ParticleCloud& cloud, int k);

// KL divergence between samples p and q:
//   (d/n) * sum_i ln(nu_k(i) / rho_k(i)) + ln(m / (n - 1)),
// rho within p (self excluded), nu against q.
double kl_knn(const ParticleCloud& p, const ParticleCloud& q, int k);

// For each head the KL of its cloud against the union of all other heads'
// clouds, averaged over heads.
double pairwise_diversity(const std::vector<ParticleCloud>& per_head, int k);

}  // namespace kmyriad
