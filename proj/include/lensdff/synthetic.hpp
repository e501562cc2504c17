#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lensdff/features.hpp"
#include "lensdff/hand.hpp"

namespace lensdff {

enum class ShapeKind { Cylinder, Box, Sphere };

/// Parametric object category. Shapes are centred on the object origin;
/// the cylinder axis is local z.
struct CategorySpec {
  std::string name;
  std::string prompt;
  ShapeKind shape = ShapeKind::Box;
  Vec3d size = Vec3d::Zero();  // cylinder (r, r, h); box side lengths; sphere (r, r, r)
  GraspPrimitive primitive = GraspPrimitive::Cylindrical;
  // Planted grasp, object frame: palm faces anchor_normal's opposite, palm y
  // along palm_y, centre slid by `slide` along the finger direction's opposite.
  Vec3d anchor_point = Vec3d::Zero();
  Vec3d anchor_normal = Vec3d::UnitX();
  Vec3d palm_y = Vec3d::UnitZ();
  double slide = 0.0;
};

/// bottle (cylindrical), box (lumbrical), ball (tripod).
std::vector<CategorySpec> default_categories();

struct SyntheticConfig {
  int feature_dim = 128;
  double point_spacing = 0.006;  // m
  double language_norm = 6.0;
  double demo_prompt_cos = 0.95;  // cosine between a category's concept and its demo prompt
  double test_prompt_cos_min = 0.35;
  double test_prompt_cos_max = 0.95;
  double concept_gain = 9.0;     // scale of the concept component of base features
  double texture_bias = -0.75;   // constant offset of the texture level
  double texture_peak = 1.5;     // height of the bump around the grasp anchor
  double texture_width = 0.3;    // bump width in half-extent units
  double texture_slope = 0.4;    // linear ramp along the planted palm y-axis
  double region_gain = 0.6;      // norm of the per-region component orthogonal to the concept
  double noise_correlation = 0.8;  // share of view noise variance that is spatially smooth
  double noise_length = 0.05;      // m, length scale of the smooth part
  double planted_gap = 0.02;     // palm to surface, m
  double contact_delta = 0.005;  // m, finger closing stops within this distance

  void validate() const;
};

/// Concept directions, demo prompts and region components for every category,
/// all derived from one seed.
struct SyntheticWorld {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::vector<CategorySpec> categories;
  std::vector<FeatureVec> concepts;               // unit, one per category
  std::vector<LanguageFeature> demo_language;     // one per category
  std::vector<Eigen::MatrixXd> region_features;   // D x regions, per category

  const CategorySpec& category(int c) const { return categories.at(static_cast<std::size_t>(c)); }
};

SyntheticWorld make_world(const SyntheticConfig& cfg, std::uint64_t seed);

inline constexpr int kRegionCount = 3;
/// Region names by label: the grasp patch, and the two halves split by the palm y-axis.
std::string_view region_name(int region);

struct SceneObject {
  std::string name;
  int category = 0;
  double scale = 1.0;
  Posed pose;                      // object to world
  Eigen::Matrix3Xd points;         // full surface, world frame
  Eigen::Matrix3Xd normals;        // outward, world frame
  std::vector<int> region;         // label per point; labels partition the points
  Eigen::MatrixXd base_features;   // D x n
  LanguageFeature language;        // prompt feature paired with this object
  std::string prompt;
  GraspPrimitive primitive = GraspPrimitive::Cylindrical;
  std::optional<Grasp> planted;

  Eigen::Index size() const { return points.cols(); }
  PointCloud cloud() const { return {points, normals, std::nullopt}; }
  /// Mean base feature of each region (D x kRegionCount).
  Eigen::MatrixXd region_mean_features() const;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  std::vector<SceneObject> objects;
};

/// Object of category `c` at `pose` with uniform `scale`, paired with `language`.
SceneObject make_object(const SyntheticWorld& world, int c, const Posed& pose, double scale,
                        const LanguageFeature& language);

/// The category's demonstration object: resting at the origin, unit scale,
/// the demo prompt, and a planted grasp.
SceneObject make_demo_object(const SyntheticWorld& world, int c, const HandModel& hand);

/// Palm placed at the category anchor, then the synergy raised from its lower
/// bound until some finger comes within contact_delta of the surface.
Grasp plant_grasp(const SyntheticWorld& world, const SceneObject& object, const HandModel& hand);

/// Three objects on a ring, random categories, sizes, yaws and test prompts.
SyntheticScene make_scene(const SyntheticWorld& world, int scene_index, int objects_per_scene = 3);

/// Camera to world pose looking at `target` (camera +z forward).
Posed look_at_camera(const Vec3d& target, double azimuth, double elevation, double distance);

/// The visible part of `object` seen from `camera` (back-face culling), with
/// features base + noise * g. Each component of g has unit variance: a share
/// (1 - noise_correlation) is white, drawn from substream (view_seed, point
/// index); the rest is a smooth random field over position fixed by view_seed.
/// Normals are not attached.
ViewFeatureCloud synthesize_view_features(const SceneObject& object, const Posed& camera, std::uint64_t view_seed,
                                          double noise, std::uint32_t view_id = 0,
                                          double noise_correlation = 0.0, double noise_length = 0.05);

/// Whole-scene view from a camera orbit position chosen by `view_seed`.
ViewFeatureCloud synthesize_view_features(const SyntheticScene& scene, std::uint64_t view_seed, double noise);

/// `count` views around `object` at evenly spaced azimuths starting at `azimuth0`.
std::vector<ViewFeatureCloud> orbit_views(const SceneObject& object, int count, double azimuth0, std::uint64_t seed,
                                          double noise, double noise_correlation = 0.0, double noise_length = 0.05);

}  // namespace lensdff
