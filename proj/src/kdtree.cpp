#include "kmyriad/kdtree.hpp"

#include <algorithm>
#include <cmath>

#include "kmyriad/errors.hpp"

namespace kmyriad {

KdTree::KdTree(const double* points, int count, int dim)
    : points_(points), count_(count), dim_(dim) {
  if (count <= 0 || dim <= 0) throw ContractError("empty point set for KdTree");
  nodes_.reserve(count);
  std::vector<int> idx(count);
  for (int i = 0; i < count; ++i) idx[i] = i;
  root_ = build(idx, 0, count, 0);
}

int KdTree::build(std::vector<int>& idx, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % dim_;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                   [&](int a, int b) {
                     const double ca = points_[static_cast<std::size_t>(a) * dim_ + axis];
                     const double cb = points_[static_cast<std::size_t>(b) * dim_ + axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  Node node;
  node.point = idx[mid];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  nodes_[self].left = build(idx, lo, mid, depth + 1);
  nodes_[self].right = build(idx, mid + 1, hi, depth + 1);
  return self;
}

void KdTree::knn(const double* query, int k, int exclude,
                 std::vector<Neighbor>& out) const {
  const int eligible = count_ - (exclude >= 0 && exclude < count_ ? 1 : 0);
  if (k < 1 || k > eligible) {
    throw ContractError("knn: k=" + std::to_string(k) + " with " +
                        std::to_string(eligible) + " eligible points");
  }
  out.clear();
  out.reserve(k + 1);
  search(root_, 0, query, k, exclude, out);
  std::sort_heap(out.begin(), out.end());
}

void KdTree::search(int node, int depth, const double* query, int k, int exclude,
                    std::vector<Neighbor>& heap) const {
  if (node < 0) return;
  const Node& n = nodes_[node];
  const double* p = points_ + static_cast<std::size_t>(n.point) * dim_;
  if (n.point != exclude) {
    const Neighbor cand{squared_distance(query, p, dim_), n.point};
    if (static_cast<int>(heap.size()) < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }
  const int axis = depth % dim_;
  const double diff = query[axis] - p[axis];
  const int near = diff < 0.0 ? n.left : n.right;
  const int far = diff < 0.0 ? n.right : n.left;
  search(near, depth + 1, query, k, exclude, heap);
  // the far half-plane can still hold a winner when the axis gap does not
  // exceed the current worst distance (ties are resolved by index)
  if (static_cast<int>(heap.size()) < k || diff * diff <= heap.front().dist2) {
    search(far, depth + 1, query, k, exclude, heap);
  }
}

}  // namespace kmyriad
