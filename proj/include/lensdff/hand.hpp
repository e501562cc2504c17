#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lensdff/geometry.hpp"

namespace lensdff {

inline constexpr int kFingerCount = 5;
inline constexpr int kJointsPerFinger = 3;
inline constexpr int kJointCount = kFingerCount * kJointsPerFinger;
inline constexpr int kGraspDim = kJointCount + 6 + 3;

/// Joint order: [thumb, index, middle, ring, little] x [abduction, proximal flexion, distal flexion].
using JointVector = Eigen::Matrix<double, kJointCount, 1>;
using GraspVector = Eigen::Matrix<double, kGraspDim, 1>;

enum class Finger { Thumb = 0, Index, Middle, Ring, Little };
enum class JointRole { Abduction = 0, ProximalFlexion, DistalFlexion };
enum class Link { Palm, Proximal, Distal };

constexpr int joint_index(Finger f, JointRole r) {
  return static_cast<int>(f) * kJointsPerFinger + static_cast<int>(r);
}

std::string_view to_string(Finger f);
std::string_view to_string(Link l);

enum class GraspPrimitive { Hook, Cylindrical, Pinch, Tripod, Lumbrical };

inline constexpr std::array<GraspPrimitive, 5> kAllPrimitives = {
    GraspPrimitive::Hook, GraspPrimitive::Cylindrical, GraspPrimitive::Pinch,
    GraspPrimitive::Tripod, GraspPrimitive::Lumbrical};

std::string_view to_string(GraspPrimitive p);
std::optional<GraspPrimitive> parse_primitive(std::string_view name);

struct JointLimits {
  JointVector lower = JointVector::Zero();
  JointVector upper = JointVector::Zero();
};

/// Elementwise clamp into [lower, upper].
JointVector clamp_joints(const JointVector& j, const JointLimits& limits);

struct FingerModel {
  std::string name;
  Posed base;                  // in the palm frame; the finger extends along local +z
  std::array<Vec3d, 3> axes;   // abduction (base frame), proximal (after abduction), distal (proximal frame)
  double proximal_length = 0.0;
  double distal_length = 0.0;
};

struct SurfacePoint {
  Link link = Link::Palm;
  int finger = -1;  // -1 for the palm
  Vec3d local = Vec3d::Zero();
};

/// Linear synergy j = j_rest + W s restricted to the active joints.
struct EigengraspMap {
  GraspPrimitive primitive = GraspPrimitive::Cylindrical;
  Eigen::Matrix<double, kJointCount, Eigen::Dynamic> expansion;
  JointVector rest = JointVector::Zero();
  std::array<bool, kJointCount> active{};

  int synergy_dim() const { return static_cast<int>(expansion.cols()); }
  /// Throws InvalidConfig when the structural invariants do not hold.
  void validate() const;
};

struct HandModel {
  std::string name;
  std::array<FingerModel, kFingerCount> fingers;
  JointLimits limits;
  JointVector rest = JointVector::Zero();
  std::vector<SurfacePoint> surface;
  std::vector<EigengraspMap> eigengrasps;

  Eigen::Index surface_count() const { return static_cast<Eigen::Index>(surface.size()); }
  const EigengraspMap& eigengrasp(GraspPrimitive p) const;
  void validate() const;
};

/// Default 5x3-DOF anthropomorphic hand with 128 surface points and the five primitive maps.
HandModel make_default_hand();

/// Full grasp: 15 joints, palm rotation as Rot6D, palm translation (24 reals).
struct Grasp {
  JointVector joints = JointVector::Zero();
  Rot6Dd rotation = (Rot6Dd() << 1, 0, 0, 0, 1, 0).finished();
  Vec3d translation = Vec3d::Zero();

  Posed palm() const { return {rot6d_to_rotation(rotation), translation}; }
  GraspVector to_vector() const;
  static Grasp from_vector(const GraspVector& v);
  static Grasp from_pose(const Posed& palm, const JointVector& joints);
};

/// Optimization variable: translation, Rot6D and synergy coefficients (9 + k reals).
struct ReducedGrasp {
  Vec3d translation = Vec3d::Zero();
  Rot6Dd rotation = (Rot6Dd() << 1, 0, 0, 0, 1, 0).finished();
  Eigen::VectorXd synergy;

  Eigen::Index dim() const { return 9 + synergy.size(); }
  Eigen::VectorXd flatten() const;
  static ReducedGrasp unflatten(const Eigen::VectorXd& v);
  Posed palm() const { return {rot6d_to_rotation(rotation), translation}; }
};

/// Surface points in the palm frame.
Eigen::Matrix3Xd surface_points_local(const HandModel& hand, const JointVector& joints);

/// Surface points in the world frame.
Eigen::Matrix3Xd forward_kinematics(const HandModel& hand, const Posed& palm, const JointVector& joints);

/// Joint origins and unit axes in the palm frame for one configuration; used
/// for kinematic Jacobians (dp/dtheta = axis x (p - origin)).
struct JointFrames {
  std::array<Vec3d, kJointCount> origin;
  std::array<Vec3d, kJointCount> axis;
};

JointFrames joint_frames(const HandModel& hand, const JointVector& joints);

/// Joints whose motion moves a surface point on `link` of `finger`.
std::vector<int> joints_moving(int finger, Link link);

/// clamp(rest + W s); inactive joints stay exactly at rest; pose is copied.
Grasp eigen_expand(const ReducedGrasp& g, const EigengraspMap& map, const JointLimits& limits);

/// Least-squares synergy for the active joint offsets; pose is copied.
ReducedGrasp eigen_project(const Grasp& g, const EigengraspMap& map);

// Hand description file (.hand.json).
HandModel hand_from_json_text(std::string_view text);
std::string hand_to_json_text(const HandModel& hand);
HandModel load_hand(const std::string& path);
void save_hand(const HandModel& hand, const std::string& path);
/// FNV-1a of the canonical JSON; pins the hand used to build cached features.
std::string hand_fingerprint(const HandModel& hand);

}  // namespace lensdff
