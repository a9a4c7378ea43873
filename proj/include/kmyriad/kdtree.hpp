#pragma once

#include <vector>

namespace kmyriad {

struct Neighbor {
  double dist2;
  int index;
};

inline bool operator<(const Neighbor& a, const Neighbor& b) {
  return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
}

// Squared Euclidean distance, accumulated in dimension order. Every distance
// in this library goes through here so that the k-d tree and the brute-force
// reference produce bit-identical values.
inline double squared_distance(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

// Exact k-nearest-neighbor index over a fixed point set. Queries return the
// same neighbors as an exhaustive scan, with ties broken by point index.
class KdTree {
 public:
  KdTree(const double* points, int count, int dim);

  // k nearest neighbors of `query`, ascending by (distance, index).
  // `exclude` skips one point index (-1 to keep all). k must not exceed the
  // number of eligible points.
  void knn(const double* query, int k, int exclude, std::vector<Neighbor>& out) const;

  int count() const { return count_; }
  int dim() const { return dim_; }

 private:
  struct Node {
    int point;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& idx, int lo, int hi, int depth);
  void search(int node, int depth, const double* query, int k, int exclude,
              std::vector<Neighbor>& heap) const;

  const double* points_;
  int count_;
  int dim_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace kmyriad
