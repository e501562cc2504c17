#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lensdff/geometry.hpp"
#include "lensdff/spatial_index.hpp"

namespace lensdff {

using FeatureVec = Eigen::VectorXd;

enum class LanguageSource : std::uint8_t { Demo = 0, Test = 1, Fused = 2 };

std::string_view to_string(LanguageSource source);

struct LanguageFeature {
  FeatureVec feature;
  LanguageSource source = LanguageSource::Demo;

  Eigen::Index dim() const { return feature.size(); }
};

/// One camera view: projected points with their raw per-point vision features
/// (one column per point).
struct ViewFeatureCloud {
  PointCloud cloud;
  Eigen::MatrixXd features;
  Posed camera_pose;

  Eigen::Index size() const { return cloud.size(); }
  Eigen::Index dim() const { return features.rows(); }
  /// Throws DimensionMismatch when feature and point counts disagree.
  void validate() const;
};

/// Multi-view point set whose features all lie on the ray spanned by `language`
/// (unless produced by fuse_views_raw).
struct DistilledCloud {
  Eigen::Matrix3Xd points;
  Eigen::MatrixXd features;
  Eigen::Matrix3Xd normals;
  LanguageFeature language;

  Eigen::Index size() const { return points.cols(); }
  Eigen::Index dim() const { return features.rows(); }
  PointCloud as_point_cloud() const { return {points, normals, std::nullopt}; }
};

/// Stacked per-surface-point features, one column per hand surface point.
struct GraspFeature {
  Eigen::MatrixXd blocks;

  Eigen::Index count() const { return blocks.cols(); }
  Eigen::Index dim() const { return blocks.rows(); }
  FeatureVec mean_block() const { return blocks.rowwise().mean(); }
  FeatureVec max_block() const { return blocks.rowwise().maxCoeff(); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double cosine_similarity(const FeatureVec& a, const FeatureVec& b);

/// sigmoid(<f_vis, f_lan> / |f_lan|^2), the scale applied to f_lan.
double enhance_coefficient(const FeatureVec& f_vis, const LanguageFeature& f_lan);

/// Projects a vision feature onto the language direction and squashes the
/// projection coefficient through a sigmoid.
FeatureVec language_enhance(const FeatureVec& f_vis, const LanguageFeature& f_lan);

/// Column-wise language_enhance; `vis` is D x n.
Eigen::MatrixXd language_enhance(const Eigen::MatrixXd& vis, const LanguageFeature& f_lan);

inline constexpr double kDefaultGateThreshold = 0.63;

/// Keeps the demo language feature when the prompts agree (cosine >= tau),
/// otherwise averages the two.
LanguageFeature gate_language(const LanguageFeature& demo, const LanguageFeature& test,
                              double tau = kDefaultGateThreshold);

struct DistillOptions {
  std::optional<double> voxel;  // <= 0 or unset disables downsampling
  bool normalize_vis = false;
  int normal_k = 16;
};

DistilledCloud distill_views(std::span<const ViewFeatureCloud> views, const LanguageFeature& f_lan,
                             const DistillOptions& options = {});

/// Direct multi-view merge with raw vision features, no language projection.
DistilledCloud fuse_views_raw(std::span<const ViewFeatureCloud> views, const LanguageFeature& f_lan,
                              const DistillOptions& options = {});

struct GraspFeatureParams {
  int k = 8;
  double eps = 1e-6;
};

/// For each surface point, the normalized inverse-square-distance weighted
/// mean of the k nearest cloud features.
GraspFeature grasp_feature(const SpatialIndex& index, const Eigen::MatrixXd& features,
                           const Eigen::Matrix3Xd& surface_points,
                           const GraspFeatureParams& params = {});

GraspFeature grasp_feature(const DistilledCloud& cloud, const Eigen::Matrix3Xd& surface_points,
                           const GraspFeatureParams& params = {});

/// Groups point indices into voxels anchored at the cloud's min corner.
/// Groups are ordered by first occurrence.
std::vector<std::vector<Eigen::Index>> voxel_groups(const Eigen::Matrix3Xd& points, double voxel);

}  // namespace lensdff
