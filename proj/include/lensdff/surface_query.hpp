#pragma once

#include <Eigen/Core>

#include "lensdff/geometry.hpp"
#include "lensdff/spatial_index.hpp"

namespace lensdff {

struct SurfaceDistance {
  double distance = 0.0;  // to the nearest cloud point
  double signed_distance = 0.0;  // along that point's outward normal, negative inside
  Eigen::Index nearest = 0;
};

/// Nearest-point distance queries against an object cloud with outward normals.
/// Without normals, they are taken to point away from the cloud centroid.
class SurfaceQuery {
 public:
  explicit SurfaceQuery(const PointCloud& cloud);

  SurfaceDistance query(const Vec3d& p) const;
  const SpatialIndex& index() const { return index_; }
  const Eigen::Matrix3Xd& normals() const { return normals_; }

 private:
  SpatialIndex index_;
  Eigen::Matrix3Xd normals_;
};

}  // namespace lensdff
