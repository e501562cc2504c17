#include "lensdff/features.hpp"

#include <cmath>
#include <map>
#include <tuple>

namespace lensdff {

namespace {

double checked_squared_norm(const LanguageFeature& f_lan) {
  const double n2 = f_lan.feature.squaredNorm();
  if (!(std::sqrt(n2) > kDegenerateNorm)) {
    throw Error(ErrorCode::ZeroLanguageFeature, "language feature has zero norm");
  }
  return n2;
}

void check_dims(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": " + std::to_string(a) +
                                                  " vs " + std::to_string(b));
  }
}

// Normals for one view: provided ones, else estimated toward the camera, else
// the unit direction to the camera for clouds too small to estimate from.
Eigen::Matrix3Xd view_normals(const ViewFeatureCloud& view, int normal_k) {
  if (view.cloud.normals) return *view.cloud.normals;
  const Vec3d cam = view.camera_pose.translation;
  if (normal_k >= 3 && view.size() >= normal_k + 1) {
    return *estimate_normals(view.cloud, normal_k, cam).normals;
  }
  Eigen::Matrix3Xd n(3, view.size());
  for (Eigen::Index i = 0; i < view.size(); ++i) {
    const Vec3d d = cam - view.cloud.points.col(i);
    n.col(i) = d.norm() > kDegenerateNorm ? Vec3d(d.normalized()) : Vec3d::UnitZ();
  }
  return n;
}

struct Merged {
  Eigen::Matrix3Xd points;
  Eigen::MatrixXd features;
  Eigen::Matrix3Xd normals;
};

template <typename FeatureFn>
DistilledCloud merge(std::span<const ViewFeatureCloud> views, const LanguageFeature& f_lan,
                     const DistillOptions& options, FeatureFn&& per_view_features) {
  if (views.empty()) throw Error(ErrorCode::EmptyInput, "no views to distill");
  const Eigen::Index dim = views.front().dim();
  Eigen::Index total = 0;
  for (const auto& v : views) {
    v.validate();
    check_dims(v.dim(), dim, "view feature dimension");
    total += v.size();
  }
  check_dims(f_lan.dim(), dim, "language feature dimension");

  Merged m{Eigen::Matrix3Xd(3, total), Eigen::MatrixXd(dim, total), Eigen::Matrix3Xd(3, total)};
  Eigen::Index offset = 0;
  for (const auto& v : views) {
    const Eigen::Index n = v.size();
    m.points.middleCols(offset, n) = v.cloud.points;
    m.features.middleCols(offset, n) = per_view_features(v);
    m.normals.middleCols(offset, n) = view_normals(v, options.normal_k);
    offset += n;
  }

  DistilledCloud out;
  out.language = f_lan;
  if (!options.voxel || *options.voxel <= 0.0 || total == 0) {
    out.points = std::move(m.points);
    out.features = std::move(m.features);
    out.normals = std::move(m.normals);
    return out;
  }

  const auto groups = voxel_groups(m.points, *options.voxel);
  const auto g = static_cast<Eigen::Index>(groups.size());
  out.points.resize(3, g);
  out.features.resize(dim, g);
  out.normals.resize(3, g);
  for (Eigen::Index gi = 0; gi < g; ++gi) {
    const auto& members = groups[static_cast<std::size_t>(gi)];
    Vec3d centroid = Vec3d::Zero();
    for (auto i : members) centroid += m.points.col(i);
    centroid /= static_cast<double>(members.size());
    Eigen::Index best = members.front();
    double best_d2 = (m.points.col(best) - centroid).squaredNorm();
    for (auto i : members) {
      const double d2 = (m.points.col(i) - centroid).squaredNorm();
      if (d2 < best_d2) {
        best = i;
        best_d2 = d2;
      }
    }
    out.points.col(gi) = centroid;
    out.features.col(gi) = m.features.col(best);
    out.normals.col(gi) = m.normals.col(best);
  }
  return out;
}

Eigen::MatrixXd maybe_normalized(const Eigen::MatrixXd& vis, bool normalize) {
  if (!normalize) return vis;
  Eigen::MatrixXd out = vis;
  for (Eigen::Index i = 0; i < out.cols(); ++i) {
    const double n = out.col(i).norm();
    if (n > kDegenerateNorm) out.col(i) /= n;
  }
  return out;
}

}  // namespace

std::string_view to_string(LanguageSource source) {
  switch (source) {
    case LanguageSource::Demo: return "demo";
    case LanguageSource::Test: return "test";
    case LanguageSource::Fused: return "fused";
  }
  return "unknown";
}

void ViewFeatureCloud::validate() const {
  check_dims(features.cols(), cloud.size(), "feature count vs point count");
  if (cloud.normals) check_dims(cloud.normals->cols(), cloud.size(), "normal count vs point count");
}

double cosine_similarity(const FeatureVec& a, const FeatureVec& b) {
  check_dims(a.size(), b.size(), "cosine similarity");
  return a.dot(b) / (a.norm() * b.norm());
}

double enhance_coefficient(const FeatureVec& f_vis, const LanguageFeature& f_lan) {
  const double n2 = checked_squared_norm(f_lan);
  check_dims(f_vis.size(), f_lan.dim(), "language_enhance");
  return sigmoid(f_vis.dot(f_lan.feature) / n2);
}

FeatureVec language_enhance(const FeatureVec& f_vis, const LanguageFeature& f_lan) {
  return enhance_coefficient(f_vis, f_lan) * f_lan.feature;
}

Eigen::MatrixXd language_enhance(const Eigen::MatrixXd& vis, const LanguageFeature& f_lan) {
  const double n2 = checked_squared_norm(f_lan);
  check_dims(vis.rows(), f_lan.dim(), "language_enhance");
  const Eigen::RowVectorXd coeff =
      ((f_lan.feature.transpose() * vis).array() / n2).unaryExpr([](double x) { return sigmoid(x); });
  return f_lan.feature * coeff;
}

LanguageFeature gate_language(const LanguageFeature& demo, const LanguageFeature& test, double tau) {
  checked_squared_norm(demo);
  checked_squared_norm(test);
  check_dims(demo.dim(), test.dim(), "gate_language");
  if (cosine_similarity(demo.feature, test.feature) >= tau) {
    return {demo.feature, LanguageSource::Demo};
  }
  return {0.5 * (demo.feature + test.feature), LanguageSource::Fused};
}

DistilledCloud distill_views(std::span<const ViewFeatureCloud> views, const LanguageFeature& f_lan,
                             const DistillOptions& options) {
  checked_squared_norm(f_lan);
  return merge(views, f_lan, options, [&](const ViewFeatureCloud& v) {
    return language_enhance(maybe_normalized(v.features, options.normalize_vis), f_lan);
  });
}

DistilledCloud fuse_views_raw(std::span<const ViewFeatureCloud> views, const LanguageFeature& f_lan,
                              const DistillOptions& options) {
  return merge(views, f_lan, options, [&](const ViewFeatureCloud& v) {
    return maybe_normalized(v.features, options.normalize_vis);
  });
}

GraspFeature grasp_feature(const SpatialIndex& index, const Eigen::MatrixXd& features,
                           const Eigen::Matrix3Xd& surface_points, const GraspFeatureParams& params) {
  if (index.size() == 0) throw Error(ErrorCode::EmptyCloud, "grasp_feature on an empty cloud");
  check_dims(features.cols(), index.size(), "feature count vs indexed points");
  GraspFeature out{Eigen::MatrixXd::Zero(features.rows(), surface_points.cols())};
  std::vector<Neighbor> nbrs;
  for (Eigen::Index n = 0; n < surface_points.cols(); ++n) {
    index.knn(surface_points.col(n), params.k, nbrs);
    double total = 0.0;
    for (const auto& nb : nbrs) total += 1.0 / (nb.squared_distance + params.eps);
    for (const auto& nb : nbrs) {
      out.blocks.col(n) += (1.0 / (nb.squared_distance + params.eps) / total) * features.col(nb.index);
    }
  }
  return out;
}

GraspFeature grasp_feature(const DistilledCloud& cloud, const Eigen::Matrix3Xd& surface_points,
                           const GraspFeatureParams& params) {
  if (cloud.size() == 0) throw Error(ErrorCode::EmptyCloud, "grasp_feature on an empty cloud");
  return grasp_feature(SpatialIndex(cloud.points), cloud.features, surface_points, params);
}

std::vector<std::vector<Eigen::Index>> voxel_groups(const Eigen::Matrix3Xd& points, double voxel) {
  std::vector<std::vector<Eigen::Index>> groups;
  if (points.cols() == 0) return groups;
  const Vec3d origin = points.rowwise().minCoeff();
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::size_t> slot;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const Vec3d cell = ((points.col(i) - origin) / voxel).array().floor();
    const auto key = std::make_tuple(static_cast<std::int64_t>(cell.x()),
                                     static_cast<std::int64_t>(cell.y()),
                                     static_cast<std::int64_t>(cell.z()));
    auto [it, inserted] = slot.try_emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

}  // namespace lensdff
