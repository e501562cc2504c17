#pragma once

#include <vector>

#include <Eigen/Core>

#include "lensdff/geometry.hpp"

namespace lensdff {

struct Neighbor {
  Eigen::Index index = 0;
  double squared_distance = 0.0;

  double distance() const;
  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Immutable k-d tree over a fixed point set. Results are ordered by ascending
/// distance with ties broken by ascending point index, so they coincide with an
/// exhaustive scan.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(Eigen::Matrix3Xd points, int leaf_size = 8);

  /// k is clamped to the number of indexed points.
  std::vector<Neighbor> knn(const Vec3d& query, Eigen::Index k) const;
  void knn(const Vec3d& query, Eigen::Index k, std::vector<Neighbor>& out) const;
  std::vector<Neighbor> radius(const Vec3d& query, double radius) const;

  Eigen::Index size() const { return points_.cols(); }
  const Eigen::Matrix3Xd& points() const { return points_; }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    int split_dim = -1;
    double split_value = 0.0;
  };

  int build(int begin, int end);
  void search_knn(int node, const Vec3d& query, Eigen::Index k, std::vector<Neighbor>& heap) const;
  void search_radius(int node, const Vec3d& query, double r2, std::vector<Neighbor>& out) const;

  Eigen::Matrix3Xd points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 8;
};

}  // namespace lensdff
