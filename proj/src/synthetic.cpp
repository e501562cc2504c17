#include "lensdff/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "lensdff/random.hpp"
#include "lensdff/sampler.hpp"
#include "lensdff/surface_query.hpp"

namespace lensdff {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kViewElevation = 35.0 * kPi / 180.0;
constexpr double kViewDistance = 0.6;

FeatureVec gaussian_vector(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  FeatureVec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = g(rng);
  return v;
}

/// Random unit vector orthogonal to the (orthonormal) columns of `basis`.
FeatureVec random_orthogonal(const Eigen::MatrixXd& basis, Rng& rng) {
  for (;;) {
    FeatureVec v = gaussian_vector(basis.rows(), rng);
    for (Eigen::Index c = 0; c < basis.cols(); ++c) v -= basis.col(c).dot(v) * basis.col(c);
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

struct Surface {
  std::vector<Vec3d> points;
  std::vector<Vec3d> normals;
  void add(const Vec3d& p, const Vec3d& n) {
    points.push_back(p);
    normals.push_back(n);
  }
};

int cells(double length, double spacing) { return std::max(1, static_cast<int>(std::lround(length / spacing))); }

void disc(Surface& s, double r, double z, double nz, double spacing) {
  s.add(Vec3d(0, 0, z), Vec3d(0, 0, nz));
  const int rings = cells(r, spacing);
  for (int j = 1; j <= rings; ++j) {
    const double rad = r * j / rings;
    const int count = cells(2 * kPi * rad, spacing);
    for (int i = 0; i < count; ++i) {
      const double a = 2 * kPi * (i + 0.5 * (j % 2)) / count;
      s.add(Vec3d(rad * std::cos(a), rad * std::sin(a), z), Vec3d(0, 0, nz));
    }
  }
}

Surface sample_shape(ShapeKind kind, const Vec3d& size, double spacing) {
  Surface s;
  switch (kind) {
    case ShapeKind::Cylinder: {
      const double r = size.x();
      const double h = size.z();
      const int around = cells(2 * kPi * r, spacing);
      const int rows = cells(h, spacing);
      for (int k = 0; k < rows; ++k) {
        const double z = -0.5 * h + h * (k + 0.5) / rows;
        for (int i = 0; i < around; ++i) {
          const double a = 2 * kPi * (i + 0.5 * (k % 2)) / around;
          const Vec3d n(std::cos(a), std::sin(a), 0.0);
          s.add(Vec3d(r * n.x(), r * n.y(), z), n);
        }
      }
      disc(s, r, 0.5 * h, 1.0, spacing);
      disc(s, r, -0.5 * h, -1.0, spacing);
      break;
    }
    case ShapeKind::Box: {
      for (int axis = 0; axis < 3; ++axis) {
        const int b = (axis + 1) % 3;
        const int c = (axis + 2) % 3;
        const int nb = cells(size[b], spacing);
        const int nc = cells(size[c], spacing);
        for (double sign : {1.0, -1.0}) {
          Vec3d n = Vec3d::Zero();
          n[axis] = sign;
          for (int i = 0; i < nb; ++i) {
            for (int j = 0; j < nc; ++j) {
              Vec3d p;
              p[axis] = 0.5 * sign * size[axis];
              p[b] = size[b] * ((i + 0.5) / nb - 0.5);
              p[c] = size[c] * ((j + 0.5) / nc - 0.5);
              s.add(p, n);
            }
          }
        }
      }
      break;
    }
    case ShapeKind::Sphere: {
      const double r = size.x();
      const int count = std::max(8, static_cast<int>(std::lround(4 * kPi * r * r / (spacing * spacing))));
      const double golden = kPi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double rho = std::sqrt(1.0 - z * z);
        const Vec3d n(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
        s.add(r * n, n);
      }
      break;
    }
  }
  return s;
}

double rest_height(const CategorySpec& spec, double scale) {
  switch (spec.shape) {
    case ShapeKind::Cylinder: return 0.5 * spec.size.z() * scale;
    case ShapeKind::Box: return 0.5 * spec.size.z() * scale;
    case ShapeKind::Sphere: return spec.size.x() * scale;
  }
  return 0.0;
}

/// Random Fourier field with unit variance per component.
class SmoothField {
 public:
  static constexpr int kTerms = 8;

  SmoothField(Eigen::Index dim, double length, std::uint64_t view_seed)
      : freq_(3, dim * kTerms), phase_(dim * kTerms) {
    Rng rng = make_rng(view_seed, kStream);
    std::normal_distribution<double> g(0.0, 1.0 / length);
    std::uniform_real_distribution<double> u(0.0, 2 * kPi);
    for (Eigen::Index c = 0; c < freq_.cols(); ++c) {
      freq_.col(c) = Vec3d(g(rng), g(rng), g(rng));
      phase_[c] = u(rng);
    }
  }

  FeatureVec at(const Vec3d& x) const {
    const Eigen::ArrayXd arg = (freq_.transpose() * x).array() + phase_.array();
    const Eigen::ArrayXd terms = arg.cos();
    return std::sqrt(2.0 / kTerms) * terms.reshaped(kTerms, phase_.size() / kTerms).colwise().sum().transpose();
  }

 private:
  static constexpr std::uint64_t kStream = 0x5F1E1D0000000000ull;
  Eigen::Matrix3Xd freq_;
  Eigen::VectorXd phase_;
};

bool touching(const SurfaceQuery& surface, const Vec3d& p, double delta) {
  const SurfaceDistance d = surface.query(p);
  return d.distance <= delta || d.signed_distance < 0.0;
}

}  // namespace

std::vector<CategorySpec> default_categories() {
  std::vector<CategorySpec> c(3);
  c[0] = {"bottle", "a bottle", ShapeKind::Cylinder, Vec3d(0.033, 0.033, 0.2), GraspPrimitive::Cylindrical,
          Vec3d(0.033, 0.0, -0.02), Vec3d::UnitX(), Vec3d::UnitZ(), 0.03};
  c[1] = {"box", "a flat box", ShapeKind::Box, Vec3d(0.16, 0.10, 0.06), GraspPrimitive::Lumbrical,
          Vec3d(0.0, 0.0, 0.03), Vec3d::UnitZ(), Vec3d::UnitX(), 0.02};
  c[2] = {"ball", "a ball", ShapeKind::Sphere, Vec3d(0.04, 0.04, 0.04), GraspPrimitive::Tripod,
          Vec3d(0.04, 0.0, 0.0), Vec3d::UnitX(), Vec3d::UnitZ(), 0.04};
  return c;
}

void SyntheticConfig::validate() const {
  const auto fail = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (feature_dim < 8) fail("feature_dim must be at least 8");
  if (!(point_spacing > 0.0)) fail("point_spacing must be positive");
  if (!(language_norm > 0.0)) fail("language_norm must be positive");
  if (!(demo_prompt_cos > -1.0 && demo_prompt_cos <= 1.0)) fail("demo_prompt_cos must lie in (-1, 1]");
  if (!(test_prompt_cos_min <= test_prompt_cos_max && test_prompt_cos_min > -1.0 && test_prompt_cos_max <= 1.0)) {
    fail("test prompt cosine range must be ordered within (-1, 1]");
  }
  if (!(texture_width > 0.0)) fail("texture_width must be positive");
  if (!(planted_gap >= 0.0) || !(contact_delta > 0.0)) fail("planted_gap >= 0 and contact_delta > 0 required");
  if (!(noise_correlation >= 0.0 && noise_correlation <= 1.0)) fail("noise_correlation must lie in [0, 1]");
  if (!(noise_length > 0.0)) fail("noise_length must be positive");
}

std::string_view region_name(int region) {
  switch (region) {
    case 0: return "grasp";
    case 1: return "upper";
    case 2: return "lower";
    default: return "unknown";
  }
}

SyntheticWorld make_world(const SyntheticConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticWorld w;
  w.config = cfg;
  w.seed = seed;
  w.categories = default_categories();
  Rng rng = make_rng(seed, 0);
  const Eigen::Index d = cfg.feature_dim;
  for (std::size_t c = 0; c < w.categories.size(); ++c) {
    const FeatureVec dir = gaussian_vector(d, rng).normalized();
    Eigen::MatrixXd basis = dir;
    const FeatureVec off = random_orthogonal(basis, rng);
    const double sn = std::sqrt(std::max(0.0, 1.0 - cfg.demo_prompt_cos * cfg.demo_prompt_cos));
    const FeatureVec lang = cfg.language_norm * (cfg.demo_prompt_cos * dir + sn * off);
    basis.conservativeResize(Eigen::NoChange, 2);
    basis.col(1) = off;
    Eigen::MatrixXd regions(d, kRegionCount);
    for (int r = 0; r < kRegionCount; ++r) {
      const FeatureVec v = random_orthogonal(basis, rng);
      regions.col(r) = cfg.region_gain * v;
      basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
      basis.col(basis.cols() - 1) = v;
    }
    w.concepts.push_back(dir);
    w.demo_language.push_back({lang, LanguageSource::Demo});
    w.region_features.push_back(regions);
  }
  return w;
}

Eigen::MatrixXd SceneObject::region_mean_features() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(base_features.rows(), kRegionCount);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(kRegionCount);
  for (Eigen::Index i = 0; i < size(); ++i) {
    out.col(region[static_cast<std::size_t>(i)]) += base_features.col(i);
    count[region[static_cast<std::size_t>(i)]] += 1.0;
  }
  for (int r = 0; r < kRegionCount; ++r) {
    if (count[r] > 0) out.col(r) /= count[r];
  }
  return out;
}

SceneObject make_object(const SyntheticWorld& world, int c, const Posed& pose, double scale,
                        const LanguageFeature& language) {
  const SyntheticConfig& cfg = world.config;
  const CategorySpec& spec = world.category(c);
  const auto cu = static_cast<std::size_t>(c);
  const Surface s = sample_shape(spec.shape, spec.size * scale, cfg.point_spacing);
  const double half = 0.5 * spec.size.maxCoeff();
  const Vec3d anchor = spec.anchor_point / half;
  const Vec3d ramp = spec.palm_y.normalized();

  SceneObject o;
  o.name = spec.name;
  o.category = c;
  o.scale = scale;
  o.pose = pose;
  o.language = language;
  o.prompt = spec.prompt;
  o.primitive = spec.primitive;
  const auto n = static_cast<Eigen::Index>(s.points.size());
  o.points.resize(3, n);
  o.normals.resize(3, n);
  o.region.resize(s.points.size());
  o.base_features.resize(cfg.feature_dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3d& local = s.points[static_cast<std::size_t>(i)];
    o.points.col(i) = pose * local;
    o.normals.col(i) = pose.rotation * s.normals[static_cast<std::size_t>(i)];
    const Vec3d u = local / (half * scale);
    const double bump = std::exp(-(u - anchor).squaredNorm() / (2.0 * cfg.texture_width * cfg.texture_width));
    const double along = u.dot(ramp);
    const int region = bump > 0.5 ? 0 : (along >= 0.0 ? 1 : 2);
    o.region[static_cast<std::size_t>(i)] = region;
    const double level = cfg.texture_bias + cfg.texture_peak * bump + cfg.texture_slope * along;
    o.base_features.col(i) = cfg.concept_gain * level * world.concepts[cu] + world.region_features[cu].col(region);
  }
  return o;
}

Grasp plant_grasp(const SyntheticWorld& world, const SceneObject& object, const HandModel& hand) {
  const CategorySpec& spec = world.category(object.category);
  const Mat3d& R = object.pose.rotation;
  const Vec3d n = (R * spec.anchor_normal).normalized();
  const Vec3d x = -n;
  Vec3d y = R * spec.palm_y;
  y = (y - y.dot(x) * x).normalized();
  Posed palm;
  palm.rotation.col(0) = x;
  palm.rotation.col(1) = y;
  palm.rotation.col(2) = x.cross(y);
  palm.translation = object.pose * (spec.anchor_point * object.scale) + world.config.planted_gap * n -
                     spec.slide * object.scale * palm.rotation.col(2);

  const EigengraspMap& map = hand.eigengrasp(spec.primitive);
  const auto bounds = synergy_bounds(map, hand.limits);
  const SurfaceQuery surface(object.cloud());
  ReducedGrasp rg{palm.translation, rotation_to_rot6d(palm.rotation), Eigen::VectorXd(map.synergy_dim())};
  for (int c = 0; c < map.synergy_dim(); ++c) rg.synergy[c] = bounds[static_cast<std::size_t>(c)].first;

  constexpr int kSteps = 200;
  Grasp best = eigen_expand(rg, map, hand.limits);
  for (int step = 1; step <= kSteps; ++step) {
    ReducedGrasp next = rg;
    for (int c = 0; c < map.synergy_dim(); ++c) {
      const auto& b = bounds[static_cast<std::size_t>(c)];
      next.synergy[c] = b.first + (b.second - b.first) * step / kSteps;
    }
    const Grasp g = eigen_expand(next, map, hand.limits);
    const Eigen::Matrix3Xd pts = forward_kinematics(hand, palm, g.joints);
    bool contact = false;
    for (Eigen::Index i = 0; i < pts.cols() && !contact; ++i) {
      if (hand.surface[static_cast<std::size_t>(i)].link == Link::Palm) continue;
      contact = touching(surface, pts.col(i), world.config.contact_delta);
    }
    best = g;
    if (contact) break;
  }
  return best;
}

SceneObject make_demo_object(const SyntheticWorld& world, int c, const HandModel& hand) {
  const CategorySpec& spec = world.category(c);
  Posed pose;
  pose.translation = Vec3d(0.0, 0.0, rest_height(spec, 1.0));
  SceneObject o = make_object(world, c, pose, 1.0, world.demo_language[static_cast<std::size_t>(c)]);
  o.planted = plant_grasp(world, o, hand);
  return o;
}

SyntheticScene make_scene(const SyntheticWorld& world, int scene_index, int objects_per_scene) {
  const SyntheticConfig& cfg = world.config;
  SyntheticScene scene;
  scene.seed = derive_seed(world.seed, 1000 + static_cast<std::uint64_t>(scene_index));
  Rng rng(scene.seed);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(world.categories.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < objects_per_scene; ++j) {
    const int c = pick(rng);
    const double scale = 0.9 + 0.2 * unit(rng);
    const double yaw = 2 * kPi * unit(rng);
    const double slot = 2 * kPi * (j + 0.2 * unit(rng)) / objects_per_scene;
    const double cos_t = cfg.test_prompt_cos_min + (cfg.test_prompt_cos_max - cfg.test_prompt_cos_min) * unit(rng);
    const FeatureVec demo_dir = world.demo_language[static_cast<std::size_t>(c)].feature.normalized();
    const FeatureVec off = random_orthogonal(demo_dir, rng);
    const FeatureVec lang =
        cfg.language_norm * (cos_t * demo_dir + std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t)) * off);

    const CategorySpec& spec = world.category(c);
    Posed pose;
    pose.rotation = Eigen::AngleAxisd(yaw, Vec3d::UnitZ()).toRotationMatrix();
    pose.translation = Vec3d(0.25 * std::cos(slot), 0.25 * std::sin(slot), rest_height(spec, scale));
    SceneObject o = make_object(world, c, pose, scale, {lang, LanguageSource::Test});
    o.name = spec.name + "-" + std::to_string(scene_index) + "-" + std::to_string(j);
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

Posed look_at_camera(const Vec3d& target, double azimuth, double elevation, double distance) {
  const Vec3d eye = target + distance * Vec3d(std::cos(elevation) * std::cos(azimuth),
                                              std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
  const Vec3d z = (target - eye).normalized();
  const Vec3d x = z.cross(Vec3d::UnitZ()).normalized();
  Posed cam;
  cam.rotation.col(0) = x;
  cam.rotation.col(1) = z.cross(x);
  cam.rotation.col(2) = z;
  cam.translation = eye;
  return cam;
}

ViewFeatureCloud synthesize_view_features(const SceneObject& object, const Posed& camera, std::uint64_t view_seed,
                                          double noise, std::uint32_t view_id, double noise_correlation,
                                          double noise_length) {
  if (!(noise_correlation >= 0.0 && noise_correlation <= 1.0) || !(noise_length > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "noise_correlation must lie in [0, 1] and noise_length be positive");
  }
  std::optional<SmoothField> smooth;
  if (noise != 0.0 && noise_correlation > 0.0) {
    smooth.emplace(object.base_features.rows(), noise_length, view_seed);
  }
  std::vector<Eigen::Index> visible;
  for (Eigen::Index i = 0; i < object.size(); ++i) {
    if (object.normals.col(i).dot(camera.translation - object.points.col(i)) > 0.0) visible.push_back(i);
  }
  ViewFeatureCloud v;
  v.camera_pose = camera;
  v.cloud.view_id = view_id;
  const auto n = static_cast<Eigen::Index>(visible.size());
  v.cloud.points.resize(3, n);
  v.features.resize(object.base_features.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = visible[static_cast<std::size_t>(k)];
    v.cloud.points.col(k) = object.points.col(i);
    v.features.col(k) = object.base_features.col(i);
    if (noise != 0.0) {
      Rng rng = make_rng(view_seed, static_cast<std::uint64_t>(i));
      v.features.col(k) += noise * std::sqrt(1.0 - noise_correlation) * gaussian_vector(v.features.rows(), rng);
      if (smooth) v.features.col(k) += noise * std::sqrt(noise_correlation) * smooth->at(object.points.col(i));
    }
  }
  return v;
}

ViewFeatureCloud synthesize_view_features(const SyntheticScene& scene, std::uint64_t view_seed, double noise) {
  Vec3d target = Vec3d::Zero();
  for (const auto& o : scene.objects) target += o.pose.translation;
  if (!scene.objects.empty()) target /= static_cast<double>(scene.objects.size());
  Rng rng = make_rng(view_seed, 0);
  const double azimuth = std::uniform_real_distribution<double>(0.0, 2 * kPi)(rng);
  const Posed camera = look_at_camera(target, azimuth, kViewElevation, 2.0 * kViewDistance);

  std::vector<ViewFeatureCloud> parts;
  Eigen::Index total = 0;
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    parts.push_back(synthesize_view_features(scene.objects[j], camera, derive_seed(view_seed, j + 1), noise));
    total += parts.back().size();
  }
  ViewFeatureCloud v;
  v.camera_pose = camera;
  v.cloud.view_id = static_cast<std::uint32_t>(view_seed & 0xFFFFFFFFu);
  v.cloud.points.resize(3, total);
  v.features.resize(parts.empty() ? 0 : parts.front().dim(), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.cloud.points.middleCols(at, p.size()) = p.cloud.points;
    v.features.middleCols(at, p.size()) = p.features;
    at += p.size();
  }
  return v;
}

std::vector<ViewFeatureCloud> orbit_views(const SceneObject& object, int count, double azimuth0, std::uint64_t seed,
                                          double noise, double noise_correlation, double noise_length) {
  std::vector<ViewFeatureCloud> views;
  for (int k = 0; k < count; ++k) {
    const double az = azimuth0 + 2 * kPi * k / count;
    const Posed cam = look_at_camera(object.pose.translation, az, kViewElevation, kViewDistance);
    views.push_back(synthesize_view_features(object, cam, derive_seed(seed, static_cast<std::uint64_t>(k)), noise,
                                             static_cast<std::uint32_t>(k), noise_correlation, noise_length));
  }
  return views;
}

}  // namespace lensdff
