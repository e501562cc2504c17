#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lensdff/geometry.hpp"
#include "lensdff/hand.hpp"
#include "lensdff/random.hpp"

namespace lensdff {

struct SamplerConfig {
  int n_samples = 10;
  double trans_noise_sigma = 0.01;  // m
  double rot_noise_sigma = 0.15;    // rad
  double standoff = 0.08;           // m, palm offset along the anchor normal
  std::uint64_t seed = 0;

  void validate() const;
};

struct GraspSeed {
  Posed palm;
  Vec3d init_x_axis = Vec3d::UnitX();  // post-noise palm x-axis, anchor of the normal term
  Eigen::VectorXd synergy_init;
  GraspPrimitive primitive = GraspPrimitive::Cylindrical;
  Eigen::Index anchor_index = 0;

  ReducedGrasp reduced() const {
    return {palm.translation, rotation_to_rot6d(palm.rotation), synergy_init};
  }
};

/// Palm frame before noise: x = -n (into the object), y = box's longest axis
/// projected off x (second axis if nearly parallel to n), sign chosen so y . +z >= 0.
Posed palm_frame_from_normal(const Vec3d& point, const Vec3d& normal, const OrientedBox& obb,
                             double standoff);

/// One palm pose with translational and axis-angle rotational noise applied.
Posed sample_palm_pose(const PointCloud& cloud, const OrientedBox& obb, const SamplerConfig& cfg,
                       Rng& rng, Eigen::Index* anchor_out = nullptr);

/// Per-synergy intervals keeping every active joint within its limits after expansion.
std::vector<std::pair<double, double>> synergy_bounds(const EigengraspMap& map, const JointLimits& limits);

/// Clamps a synergy vector into synergy_bounds.
Eigen::VectorXd clamp_synergy(const Eigen::VectorXd& s, const std::vector<std::pair<double, double>>& bounds);

/// Uniform draw inside synergy_bounds.
Eigen::VectorXd sample_joint_init(const EigengraspMap& map, const JointLimits& limits, Rng& rng);

/// cfg.n_samples seeds; sample i uses substream i of cfg.seed, so the result
/// does not depend on evaluation order.
std::vector<GraspSeed> sample_palm_poses(const PointCloud& cloud, const OrientedBox& obb,
                                         const SamplerConfig& cfg, const EigengraspMap& map,
                                         const JointLimits& limits);

}  // namespace lensdff
