#include "lensdff/surface_query.hpp"

#include <cmath>

namespace lensdff {

SurfaceQuery::SurfaceQuery(const PointCloud& cloud) : index_(cloud.points) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "surface query on an empty cloud");
  if (cloud.normals) {
    normals_ = *cloud.normals;
  } else {
    const Vec3d c = cloud.points.rowwise().mean();
    normals_ = cloud.points.colwise() - c;
    for (Eigen::Index i = 0; i < normals_.cols(); ++i) {
      const double n = normals_.col(i).norm();
      normals_.col(i) = n > kDegenerateNorm ? Vec3d(normals_.col(i) / n) : Vec3d::UnitZ();
    }
  }
}

SurfaceDistance SurfaceQuery::query(const Vec3d& p) const {
  const Neighbor nb = index_.knn(p, 1).front();
  const Vec3d d = p - index_.points().col(nb.index);
  return {std::sqrt(nb.squared_distance), d.dot(normals_.col(nb.index)), nb.index};
}

}  // namespace lensdff
