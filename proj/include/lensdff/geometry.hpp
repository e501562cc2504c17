#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lensdff/error.hpp"

namespace lensdff {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
/// First two columns of a rotation matrix stacked as [a1; a2].
template <typename Scalar>
using Rot6D = Eigen::Matrix<Scalar, 6, 1>;

using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Rot6Dd = Rot6D<double>;

inline constexpr double kDegenerateNorm = 1e-9;

/// Gram-Schmidt map from the continuous 6D representation to SO(3).
/// Throws DegenerateInput when either half cannot be normalized.
template <typename Derived>
Mat3<typename Derived::Scalar> rot6d_to_rotation(const Eigen::MatrixBase<Derived>& r) {
  EIGEN_STATIC_ASSERT_VECTOR_SPECIFIC_SIZE(Derived, 6);
  using Scalar = typename Derived::Scalar;
  const Vec3<Scalar> a1 = r.template head<3>();
  const Vec3<Scalar> a2 = r.template tail<3>();
  const Scalar n1 = a1.norm();
  if (!(n1 >= Scalar(kDegenerateNorm))) {
    throw Error(ErrorCode::DegenerateInput, "first rot6d column has vanishing norm");
  }
  const Vec3<Scalar> e1 = a1 / n1;
  const Vec3<Scalar> b2 = a2 - e1.dot(a2) * e1;
  const Scalar n2 = b2.norm();
  if (!(n2 >= Scalar(kDegenerateNorm))) {
    throw Error(ErrorCode::DegenerateInput, "rot6d columns are collinear");
  }
  Mat3<Scalar> R;
  R.col(0) = e1;
  R.col(1) = b2 / n2;
  R.col(2) = R.col(0).cross(R.col(1));
  return R;
}

template <typename Derived>
Rot6D<typename Derived::Scalar> rotation_to_rot6d(const Eigen::MatrixBase<Derived>& R) {
  EIGEN_STATIC_ASSERT_MATRIX_SPECIFIC_SIZE(Derived, 3, 3);
  Rot6D<typename Derived::Scalar> r;
  r << R.col(0), R.col(1);
  return r;
}

/// Rigid transform x -> R x + t.
template <typename Scalar>
struct Pose {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static Pose identity() { return {}; }

  template <typename Derived>
  Vec3<Scalar> operator*(const Eigen::MatrixBase<Derived>& p) const {
    return rotation * p + translation;
  }

  Pose operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Pose inverse() const {
    const Mat3<Scalar> rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  /// Applies the transform to every column.
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> apply(
      const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& points) const {
    return (rotation * points).colwise() + translation;
  }
};

using Posed = Pose<double>;

/// Max-abs deviation of R from SO(3): max(|R^T R - I|, |det R - 1|).
template <typename Derived>
typename Derived::Scalar rotation_error(const Eigen::MatrixBase<Derived>& R) {
  using Scalar = typename Derived::Scalar;
  const Scalar ortho = (R.transpose() * R - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(R.determinant() - Scalar(1)));
}

struct PointCloud {
  Eigen::Matrix3Xd points;
  std::optional<Eigen::Matrix3Xd> normals;
  std::optional<std::uint32_t> view_id;

  Eigen::Index size() const { return points.cols(); }
  bool empty() const { return points.cols() == 0; }
  bool has_normals() const { return normals.has_value(); }
};

/// Box axes are the columns of `axes`, ordered by descending extent.
struct OrientedBox {
  Vec3d center = Vec3d::Zero();
  Mat3d axes = Mat3d::Identity();
  Vec3d extents = Vec3d::Zero();  // full side lengths

  bool contains(const Vec3d& p, double inflate = 0.0) const {
    const Vec3d local = axes.transpose() * (p - center);
    return ((local.cwiseAbs() - 0.5 * extents).array() <= inflate).all();
  }
};

/// PCA box: axes from the covariance eigenvectors, extents from min/max projections.
/// Throws DegenerateCloud for fewer than two distinct points.
OrientedBox fit_obb(const PointCloud& cloud);

/// Local-plane normals from the k nearest neighbours (plus the point itself),
/// each flipped so that n . (viewpoint - p) >= 0.
/// Throws TooFewPoints when the cloud has fewer than k + 1 points or k < 3.
PointCloud estimate_normals(const PointCloud& cloud, int k, const Vec3d& viewpoint);

}  // namespace lensdff
