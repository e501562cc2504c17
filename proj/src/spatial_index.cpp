#include "lensdff/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lensdff {

double Neighbor::distance() const { return std::sqrt(squared_distance); }

SpatialIndex::SpatialIndex(Eigen::Matrix3Xd points, int leaf_size)
    : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(static_cast<std::size_t>(points_.cols()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) {
    nodes_.reserve(2 * order_.size() / static_cast<std::size_t>(leaf_size_) + 1);
    build(0, static_cast<int>(order_.size()));
  }
}

int SpatialIndex::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= leaf_size_) return id;

  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
  Vec3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.col(order_[i]));
    hi = hi.cwiseMax(points_.col(order_[i]));
  }
  int dim = 0;
  (hi - lo).maxCoeff(&dim);
  if (hi[dim] - lo[dim] <= 0.0) return id;  // all coincident

  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return points_(dim, a) < points_(dim, b); });
  const double split = points_(dim, order_[mid]);

  nodes_[id].split_dim = dim;
  nodes_[id].split_value = split;
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3d& query, Eigen::Index k) const {
  std::vector<Neighbor> out;
  knn(query, k, out);
  return out;
}

void SpatialIndex::knn(const Vec3d& query, Eigen::Index k, std::vector<Neighbor>& out) const {
  out.clear();
  k = std::min(k, size());
  if (k <= 0) return;
  out.reserve(static_cast<std::size_t>(k) + 1);
  search_knn(0, query, k, out);
}

// `heap` is kept sorted ascending; k is small, so insertion sort beats a binary heap.
void SpatialIndex::search_knn(int node_id, const Vec3d& query, Eigen::Index k,
                              std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_id];
  if (node.split_dim < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const Neighbor cand{idx, (points_.col(idx) - query).squaredNorm()};
      if (static_cast<Eigen::Index>(heap.size()) == k && !(cand < heap.back())) continue;
      heap.insert(std::upper_bound(heap.begin(), heap.end(), cand), cand);
      if (static_cast<Eigen::Index>(heap.size()) > k) heap.pop_back();
    }
    return;
  }
  const double diff = query[node.split_dim] - node.split_value;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search_knn(near, query, k, heap);
  // Ties at the bound must still be visited so the index tie-break is honoured.
  if (static_cast<Eigen::Index>(heap.size()) < k || diff * diff <= heap.back().squared_distance) {
    search_knn(far, query, k, heap);
  }
}

std::vector<Neighbor> SpatialIndex::radius(const Vec3d& query, double r) const {
  std::vector<Neighbor> out;
  if (!nodes_.empty() && r >= 0.0) search_radius(0, query, r * r, out);
  std::sort(out.begin(), out.end());
  return out;
}

void SpatialIndex::search_radius(int node_id, const Vec3d& query, double r2,
                                 std::vector<Neighbor>& out) const {
  const Node& node = nodes_[node_id];
  if (node.split_dim < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d2 = (points_.col(idx) - query).squaredNorm();
      if (d2 <= r2) out.push_back({idx, d2});
    }
    return;
  }
  const double diff = query[node.split_dim] - node.split_value;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search_radius(near, query, r2, out);
  if (diff * diff <= r2) search_radius(far, query, r2, out);
}

}  // namespace lensdff
