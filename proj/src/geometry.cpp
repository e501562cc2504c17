#include "lensdff/geometry.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "lensdff/spatial_index.hpp"

namespace lensdff {

namespace {

constexpr double kMinExtent = 1e-9;

bool has_two_distinct(const Eigen::Matrix3Xd& pts) {
  for (Eigen::Index i = 1; i < pts.cols(); ++i) {
    if (pts.col(i) != pts.col(0)) return true;
  }
  return false;
}

}  // namespace

OrientedBox fit_obb(const PointCloud& cloud) {
  const Eigen::Matrix3Xd& pts = cloud.points;
  if (pts.cols() < 2 || !has_two_distinct(pts)) {
    throw Error(ErrorCode::DegenerateCloud, "fit_obb needs at least two distinct points");
  }
  const Vec3d mean = pts.rowwise().mean();
  const Eigen::Matrix3Xd centered = pts.colwise() - mean;
  const Mat3d cov = centered * centered.transpose() / static_cast<double>(pts.cols());

  Eigen::SelfAdjointEigenSolver<Mat3d> eig(cov);
  // Eigen returns ascending eigenvalues; start from the principal direction.
  Mat3d pca = eig.eigenvectors().rowwise().reverse();

  const Eigen::Matrix3Xd local = pca.transpose() * centered;
  const Vec3d lo = local.rowwise().minCoeff();
  const Vec3d hi = local.rowwise().maxCoeff();
  const Vec3d ext = hi - lo;

  std::array<int, 3> perm{0, 1, 2};
  std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return ext[a] > ext[b]; });

  OrientedBox box;
  box.center = mean + pca * (0.5 * (lo + hi));
  for (int i = 0; i < 3; ++i) {
    box.axes.col(i) = pca.col(perm[i]);
    box.extents[i] = std::max(ext[perm[i]], kMinExtent);
  }
  box.axes.col(2) = box.axes.col(0).cross(box.axes.col(1));
  return box;
}

PointCloud estimate_normals(const PointCloud& cloud, int k, const Vec3d& viewpoint) {
  if (k < 3) throw Error(ErrorCode::TooFewPoints, "normal estimation needs k >= 3");
  if (cloud.size() < k + 1) {
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs at least k + 1 points");
  }
  const SpatialIndex index(cloud.points);
  Eigen::Matrix3Xd normals(3, cloud.size());
  std::vector<Neighbor> nbrs;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Vec3d p = cloud.points.col(i);
    index.knn(p, k + 1, nbrs);
    Vec3d mean = Vec3d::Zero();
    for (const auto& nb : nbrs) mean += cloud.points.col(nb.index);
    mean /= static_cast<double>(nbrs.size());
    Mat3d cov = Mat3d::Zero();
    for (const auto& nb : nbrs) {
      const Vec3d d = cloud.points.col(nb.index) - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3d> eig(cov);
    Vec3d n = eig.eigenvectors().col(0).normalized();
    if (n.dot(viewpoint - p) < 0.0) n = -n;
    normals.col(i) = n;
  }
  PointCloud out = cloud;
  out.normals = std::move(normals);
  return out;
}

}  // namespace lensdff
