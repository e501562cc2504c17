#include "lensdff/sampler.hpp"

#include <cmath>
#include <limits>

namespace lensdff {

void SamplerConfig::validate() const {
  if (n_samples < 1) throw Error(ErrorCode::InvalidConfig, "sampler.n_samples must be >= 1");
  if (!(trans_noise_sigma >= 0.0) || !(rot_noise_sigma >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "sampler noise sigmas must be >= 0");
  }
}

Posed palm_frame_from_normal(const Vec3d& point, const Vec3d& normal, const OrientedBox& obb,
                             double standoff) {
  const Vec3d n = normal.normalized();
  const Vec3d x = -n;
  Vec3d axis = obb.axes.col(0);
  if (std::abs(n.dot(axis)) > 1.0 - 1e-6) axis = obb.axes.col(1);
  Vec3d y = (axis - axis.dot(x) * x).normalized();
  if (y.z() < 0.0) y = -y;
  Posed pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = x.cross(y);
  pose.translation = point + standoff * n;
  return pose;
}

Posed sample_palm_pose(const PointCloud& cloud, const OrientedBox& obb, const SamplerConfig& cfg,
                       Rng& rng, Eigen::Index* anchor_out) {
  if (!cloud.normals) throw Error(ErrorCode::InvalidConfig, "palm sampling needs cloud normals");
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "palm sampling on an empty cloud");
  std::uniform_int_distribution<Eigen::Index> pick(0, cloud.size() - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Eigen::Index anchor = pick(rng);
  Posed pose = palm_frame_from_normal(cloud.points.col(anchor), cloud.normals->col(anchor), obb,
                                      cfg.standoff);

  const Vec3d dt(gauss(rng), gauss(rng), gauss(rng));
  Vec3d axis(gauss(rng), gauss(rng), gauss(rng));
  const double angle = cfg.rot_noise_sigma * gauss(rng);
  if (axis.norm() < kDegenerateNorm) axis = Vec3d::UnitZ();
  pose.translation += cfg.trans_noise_sigma * dt;
  pose.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix() * pose.rotation;
  if (anchor_out) *anchor_out = anchor;
  return pose;
}

std::vector<std::pair<double, double>> synergy_bounds(const EigengraspMap& map, const JointLimits& limits) {
  std::vector<std::pair<double, double>> bounds;
  for (int c = 0; c < map.synergy_dim(); ++c) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (int r = 0; r < kJointCount; ++r) {
      const double w = map.expansion(r, c);
      if (w == 0.0 || !map.active[static_cast<std::size_t>(r)]) continue;
      double a = (limits.lower[r] - map.rest[r]) / w;
      double b = (limits.upper[r] - map.rest[r]) / w;
      if (a > b) std::swap(a, b);
      lo = std::max(lo, a);
      hi = std::min(hi, b);
    }
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw Error(ErrorCode::InvalidConfig, "eigengrasp synergy has an empty or unbounded feasible interval");
    }
    bounds.emplace_back(lo, hi);
  }
  return bounds;
}

Eigen::VectorXd clamp_synergy(const Eigen::VectorXd& s, const std::vector<std::pair<double, double>>& bounds) {
  Eigen::VectorXd out = s;
  for (std::size_t c = 0; c < bounds.size(); ++c) {
    const auto i = static_cast<Eigen::Index>(c);
    out[i] = std::clamp(out[i], bounds[c].first, bounds[c].second);
  }
  return out;
}

Eigen::VectorXd sample_joint_init(const EigengraspMap& map, const JointLimits& limits, Rng& rng) {
  const auto bounds = synergy_bounds(map, limits);
  Eigen::VectorXd s(map.synergy_dim());
  for (std::size_t c = 0; c < bounds.size(); ++c) {
    std::uniform_real_distribution<double> u(bounds[c].first, bounds[c].second);
    s[static_cast<Eigen::Index>(c)] = u(rng);
  }
  return s;
}

std::vector<GraspSeed> sample_palm_poses(const PointCloud& cloud, const OrientedBox& obb,
                                         const SamplerConfig& cfg, const EigengraspMap& map,
                                         const JointLimits& limits) {
  cfg.validate();
  std::vector<GraspSeed> seeds(static_cast<std::size_t>(cfg.n_samples));
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(i));
    GraspSeed& s = seeds[static_cast<std::size_t>(i)];
    s.palm = sample_palm_pose(cloud, obb, cfg, rng, &s.anchor_index);
    s.init_x_axis = s.palm.rotation.col(0);
    s.synergy_init = sample_joint_init(map, limits, rng);
    s.primitive = map.primitive;
  }
  return seeds;
}

}  // namespace lensdff
