#include <numbers>

#include "lensdff/hand.hpp"
#include "lensdff/random.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

const HandModel& hand() {
  static const HandModel h = make_default_hand();
  return h;
}

ReducedGrasp reduced(std::initializer_list<double> s) {
  ReducedGrasp g;
  g.synergy.resize(static_cast<Eigen::Index>(s.size()));
  Eigen::Index i = 0;
  for (double v : s) g.synergy[i++] = v;
  return g;
}

bool is_flexion(int r) { return r % kJointsPerFinger != 0; }

}  // namespace

TEST_SUITE("hand") {
  TEST_CASE("default hand shape") {
    const HandModel& h = hand();
    CHECK(h.surface_count() == 128);
    CHECK(h.eigengrasps.size() == 5);
    for (GraspPrimitive p : kAllPrimitives) CHECK(h.eigengrasp(p).primitive == p);
    CHECK_NOTHROW(h.validate());
  }

  TEST_CASE("primitive names") {
    for (GraspPrimitive p : kAllPrimitives) CHECK(parse_primitive(to_string(p)) == p);
    CHECK(parse_primitive("cylindrical") == GraspPrimitive::Cylindrical);
    CHECK_FALSE(parse_primitive("power").has_value());
  }

  TEST_CASE("rest pose with identity palm is the reference surface") {
    const Eigen::Matrix3Xd world = forward_kinematics(hand(), Posed::identity(), hand().rest);
    CHECK(world == surface_points_local(hand(), hand().rest));
    for (Eigen::Index i = 0; i < 16; ++i) CHECK(world.col(i) == hand().surface[static_cast<std::size_t>(i)].local);
  }

  TEST_CASE("palm motion is rigid") {
    const Eigen::Matrix3Xd ref = forward_kinematics(hand(), Posed::identity(), hand().rest);
    const Eigen::Matrix3Xd shifted = forward_kinematics(hand(), {Mat3d::Identity(), Vec3d(0.1, 0, 0)}, hand().rest);
    CHECK(((shifted.colwise() - Vec3d(0.1, 0, 0)) - ref).cwiseAbs().maxCoeff() < 1e-15);
    const Mat3d rz = Eigen::AngleAxisd(std::numbers::pi / 2, Vec3d::UnitZ()).toRotationMatrix();
    const Eigen::Matrix3Xd rotated = forward_kinematics(hand(), {rz, Vec3d::Zero()}, hand().rest);
    CHECK((rotated - rz * ref).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("flexing one finger moves only that finger") {
    JointVector j = hand().rest;
    j[joint_index(Finger::Middle, JointRole::ProximalFlexion)] = 0.8;
    const Eigen::Matrix3Xd ref = surface_points_local(hand(), hand().rest);
    const Eigen::Matrix3Xd bent = surface_points_local(hand(), j);
    for (Eigen::Index i = 0; i < ref.cols(); ++i) {
      const bool middle = hand().surface[static_cast<std::size_t>(i)].finger == static_cast<int>(Finger::Middle);
      if (middle) {
        CHECK((bent.col(i) - ref.col(i)).norm() > 0.0);
      } else {
        CHECK(bent.col(i) == ref.col(i));
      }
    }
  }

  TEST_CASE("joint Jacobians match finite differences") {
    Rng rng = make_rng(9, 0);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    JointVector j = JointVector::NullaryExpr([&] { return u(rng); });
    j = clamp_joints(j, hand().limits);
    const JointFrames frames = joint_frames(hand(), j);
    const Eigen::Matrix3Xd base = surface_points_local(hand(), j);
    const double h = 1e-7;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < base.cols(); ++i) {
      const auto& sp = hand().surface[static_cast<std::size_t>(i)];
      for (int r : joints_moving(sp.finger, sp.link)) {
        JointVector jp = j, jm = j;
        jp[r] += h;
        jm[r] -= h;
        const Vec3d fd = (surface_points_local(hand(), jp).col(i) - surface_points_local(hand(), jm).col(i)) / (2 * h);
        const Vec3d an = frames.axis[static_cast<std::size_t>(r)].cross(Vec3d(base.col(i)) - frames.origin[static_cast<std::size_t>(r)]);
        worst = std::max(worst, (fd - an).norm());
      }
    }
    CHECK(worst < 1e-7);
  }

  TEST_CASE("pinch synergy flexes thumb and index only") {
    const Grasp g = eigen_expand(reduced({0.5}), hand().eigengrasp(GraspPrimitive::Pinch), hand().limits);
    for (int r = 0; r < kJointCount; ++r) {
      const int finger = r / kJointsPerFinger;
      const bool moved = finger <= static_cast<int>(Finger::Index) && is_flexion(r);
      CHECK(g.joints[r] == (moved ? hand().rest[r] + 0.5 : hand().rest[r]));
    }
  }

  TEST_CASE("cylindrical synergy at zero and far past the limits") {
    const EigengraspMap& cyl = hand().eigengrasp(GraspPrimitive::Cylindrical);
    CHECK(eigen_expand(reduced({0.0}), cyl, hand().limits).joints == hand().rest);
    const Grasp full = eigen_expand(reduced({10.0}), cyl, hand().limits);
    for (int r = 0; r < kJointCount; ++r) {
      CHECK(full.joints[r] == (is_flexion(r) ? hand().limits.upper[r] : hand().rest[r]));
    }
    CHECK_ERROR_CODE(eigen_expand(reduced({1.0, 2.0}), cyl, hand().limits), ErrorCode::DimensionMismatch);
  }

  TEST_CASE("active joints per primitive") {
    auto count = [](GraspPrimitive p) {
      const auto& a = hand().eigengrasp(p).active;
      return std::count(a.begin(), a.end(), true);
    };
    CHECK(count(GraspPrimitive::Hook) == 8);
    CHECK(count(GraspPrimitive::Cylindrical) == 10);
    CHECK(count(GraspPrimitive::Pinch) == 4);
    CHECK(count(GraspPrimitive::Tripod) == 6);
    CHECK(count(GraspPrimitive::Lumbrical) == 5);
    const auto& hook = hand().eigengrasp(GraspPrimitive::Hook).active;
    for (int r = 0; r < kJointsPerFinger; ++r) CHECK_FALSE(hook[static_cast<std::size_t>(r)]);
  }

  TEST_CASE("expand then project recovers in-range synergies") {
    const EigengraspMap& pinch = hand().eigengrasp(GraspPrimitive::Pinch);
    const ReducedGrasp back = eigen_project(eigen_expand(reduced({0.3}), pinch, hand().limits), pinch);
    CHECK(std::abs(back.synergy[0] - 0.3) < 1e-9);
    Grasp rest;
    rest.joints = hand().rest;
    CHECK(eigen_project(rest, pinch).synergy.norm() == 0.0);
  }

  TEST_CASE("projection is the least-squares solution") {
    Rng rng = make_rng(10, 0);
    std::normal_distribution<double> g(0.0, 1.0);
    EigengraspMap map = hand().eigengrasp(GraspPrimitive::Tripod);
    map.expansion = Eigen::Matrix<double, kJointCount, Eigen::Dynamic>::Zero(kJointCount, 2);
    std::vector<int> rows;
    for (int r = 0; r < kJointCount; ++r) {
      if (!map.active[static_cast<std::size_t>(r)]) continue;
      rows.push_back(r);
      map.expansion(r, 0) = g(rng);
      map.expansion(r, 1) = g(rng);
    }
    Grasp target;
    target.joints = JointVector::NullaryExpr([&] { return g(rng); });

    Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), 2);
    Eigen::VectorXd delta(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      w.row(static_cast<Eigen::Index>(i)) = map.expansion.row(rows[i]);
      delta[static_cast<Eigen::Index>(i)] = target.joints[rows[i]] - map.rest[rows[i]];
    }
    const Eigen::VectorXd oracle = (w.transpose() * w).inverse() * (w.transpose() * delta);
    CHECK((eigen_project(target, map).synergy - oracle).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("clamping") {
    const JointLimits& lim = hand().limits;
    const JointVector mid = 0.5 * (lim.lower + lim.upper);
    CHECK(clamp_joints(mid, lim) == mid);
    CHECK(clamp_joints(JointVector::Constant(std::numeric_limits<double>::infinity()), lim) == lim.upper);
    CHECK(clamp_joints(JointVector::Constant(-std::numeric_limits<double>::infinity()), lim) == lim.lower);
    const JointVector wild = JointVector::LinSpaced(-3.0, 3.0);
    CHECK(clamp_joints(clamp_joints(wild, lim), lim) == clamp_joints(wild, lim));
  }

  TEST_CASE("grasp vector layout") {
    Grasp g;
    g.joints = JointVector::LinSpaced(0.0, 1.4);
    g.rotation << 0, 1, 0, -1, 0, 0;
    g.translation = Vec3d(1, 2, 3);
    const GraspVector v = g.to_vector();
    CHECK(v.head<kJointCount>() == g.joints);
    CHECK(v.segment<6>(kJointCount) == g.rotation);
    CHECK(v.tail<3>() == g.translation);
    CHECK(Grasp::from_vector(v).to_vector() == v);
  }

  TEST_CASE("reduced grasp flattening") {
    ReducedGrasp g = reduced({0.1, 0.2});
    g.translation = Vec3d(1, 2, 3);
    CHECK(g.dim() == 11);
    const Eigen::VectorXd v = g.flatten();
    CHECK(v.head<3>() == g.translation);
    CHECK(ReducedGrasp::unflatten(v).flatten() == v);
  }

  TEST_CASE("hand description round trip") {
    const std::string text = hand_to_json_text(hand());
    const HandModel back = hand_from_json_text(text);
    CHECK(hand_to_json_text(back) == text);
    CHECK(hand_fingerprint(back) == hand_fingerprint(hand()));
    CHECK(forward_kinematics(back, Posed::identity(), back.rest) ==
          forward_kinematics(hand(), Posed::identity(), hand().rest));
  }

  TEST_CASE("shipped hand file matches the built-in hand") {
    CHECK(hand_fingerprint(load_hand(LENSDFF_DATA_DIR "/default.hand.json")) == hand_fingerprint(hand()));
  }

  TEST_CASE("malformed hand descriptions") {
    CHECK_ERROR_CODE(hand_from_json_text("{"), ErrorCode::MalformedFile);
    CHECK_ERROR_CODE(hand_from_json_text("{}"), ErrorCode::MalformedFile);
  }
}
