#include "lensdff/hand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/QR>
#include <json.hpp>

#include "lensdff/binary_io.hpp"

namespace lensdff {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kFingerCount> kFingerNames = {"thumb", "index", "middle",
                                                                     "ring", "little"};
constexpr std::array<std::string_view, 5> kPrimitiveNames = {"hook", "cylindrical", "pinch",
                                                             "tripod", "lumbrical"};
constexpr int kHandFormatVersion = 1;

Mat3d axis_rotation(const Vec3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

struct FingerFrames {
  Posed proximal;
  Posed distal;
};

FingerFrames finger_frames(const FingerModel& f, const double* q) {
  FingerFrames out;
  out.proximal.rotation = f.base.rotation * axis_rotation(f.axes[0], q[0]) * axis_rotation(f.axes[1], q[1]);
  out.proximal.translation = f.base.translation;
  out.distal = out.proximal * Posed{axis_rotation(f.axes[2], q[2]), Vec3d(0, 0, f.proximal_length)};
  return out;
}

std::vector<int> flexion_rows(std::initializer_list<Finger> fingers, bool distal = true) {
  std::vector<int> rows;
  for (Finger f : fingers) {
    rows.push_back(joint_index(f, JointRole::ProximalFlexion));
    if (distal) rows.push_back(joint_index(f, JointRole::DistalFlexion));
  }
  return rows;
}

EigengraspMap make_map(GraspPrimitive p, const JointVector& rest, const std::vector<int>& rows) {
  EigengraspMap m;
  m.primitive = p;
  m.rest = rest;
  m.expansion = Eigen::Matrix<double, kJointCount, Eigen::Dynamic>::Zero(kJointCount, 1);
  for (int r : rows) {
    m.expansion(r, 0) = 1.0;
    m.active[static_cast<std::size_t>(r)] = true;
  }
  return m;
}

// Points on a finger link: rings of `angles` around the link axis at fractions of its length.
void add_link_points(std::vector<SurfacePoint>& out, int finger, Link link, double length,
                     std::initializer_list<double> fractions, std::initializer_list<double> angles) {
  constexpr double kRadius = 0.009;
  for (double t : fractions) {
    for (double a : angles) {
      out.push_back({link, finger, Vec3d(kRadius * std::cos(a), kRadius * std::sin(a), t * length)});
    }
  }
}

json vec_json(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3d vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::MalformedFile, "expected 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

int finger_from_name(const std::string& name) {
  for (int i = 0; i < kFingerCount; ++i) {
    if (kFingerNames[static_cast<std::size_t>(i)] == name) return i;
  }
  throw Error(ErrorCode::MalformedFile, "unknown finger '" + name + "'");
}

Link link_from_name(const std::string& name) {
  if (name == "palm") return Link::Palm;
  if (name == "proximal") return Link::Proximal;
  if (name == "distal") return Link::Distal;
  throw Error(ErrorCode::MalformedFile, "unknown link '" + name + "'");
}

}  // namespace

std::string_view to_string(Finger f) { return kFingerNames[static_cast<std::size_t>(f)]; }

std::string_view to_string(Link l) {
  switch (l) {
    case Link::Palm: return "palm";
    case Link::Proximal: return "proximal";
    case Link::Distal: return "distal";
  }
  return "unknown";
}

std::string_view to_string(GraspPrimitive p) { return kPrimitiveNames[static_cast<std::size_t>(p)]; }

std::optional<GraspPrimitive> parse_primitive(std::string_view name) {
  for (std::size_t i = 0; i < kPrimitiveNames.size(); ++i) {
    if (kPrimitiveNames[i] == name) return static_cast<GraspPrimitive>(i);
  }
  return std::nullopt;
}

JointVector clamp_joints(const JointVector& j, const JointLimits& limits) {
  return j.cwiseMax(limits.lower).cwiseMin(limits.upper);
}

void EigengraspMap::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (expansion.cols() < 1) fail("eigengrasp needs at least one synergy");
  Eigen::Matrix<double, kJointCount, 1> support_count = Eigen::Matrix<double, kJointCount, 1>::Zero();
  for (int r = 0; r < kJointCount; ++r) {
    for (Eigen::Index c = 0; c < expansion.cols(); ++c) {
      if (expansion(r, c) == 0.0) continue;
      if (!active[static_cast<std::size_t>(r)]) fail("inactive joint has a nonzero synergy row");
      support_count[r] += 1.0;
    }
  }
  if ((support_count.array() > 1.0).any()) fail("synergy columns must have disjoint support");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(expansion);
  if (qr.rank() != expansion.cols()) fail("synergy matrix must have full column rank");
}

const EigengraspMap& HandModel::eigengrasp(GraspPrimitive p) const {
  for (const auto& m : eigengrasps) {
    if (m.primitive == p) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "hand has no eigengrasp for " + std::string(to_string(p)));
}

void HandModel::validate() const {
  if (surface.empty()) throw Error(ErrorCode::InvalidConfig, "hand needs surface points");
  if (!(limits.lower.array() < limits.upper.array()).all()) {
    throw Error(ErrorCode::InvalidConfig, "joint limits need lower < upper");
  }
  for (const auto& sp : surface) {
    if ((sp.link == Link::Palm) != (sp.finger < 0) || sp.finger >= kFingerCount) {
      throw Error(ErrorCode::InvalidConfig, "surface point bound to an invalid link");
    }
  }
  for (const auto& f : fingers) {
    if (rotation_error(f.base.rotation) > 1e-6) {
      throw Error(ErrorCode::InvalidConfig, "finger base rotation is not orthonormal");
    }
  }
  for (const auto& m : eigengrasps) m.validate();
}

HandModel make_default_hand() {
  HandModel h;
  h.name = "anthropomorphic-5x3";
  constexpr double kProximal = 0.05;
  constexpr double kDistal = 0.04;
  const Vec3d abduction_axis(1, 0, 0);
  const Vec3d flexion_axis(0, 1, 0);

  // Four fingers side by side along palm y, extending along +z and curling toward +x.
  const std::array<double, 4> finger_y = {0.027, 0.009, -0.009, -0.027};
  for (int i = 1; i < kFingerCount; ++i) {
    FingerModel& f = h.fingers[static_cast<std::size_t>(i)];
    f.name = std::string(kFingerNames[static_cast<std::size_t>(i)]);
    f.base = {Mat3d::Identity(), Vec3d(0.0, finger_y[static_cast<std::size_t>(i - 1)], 0.05)};
    f.axes = {abduction_axis, flexion_axis, flexion_axis};
    f.proximal_length = kProximal;
    f.distal_length = kDistal;
  }
  // Thumb rooted low on the index side, pointing up and out; flexion swings it
  // in front of the palm toward the fingers.
  {
    FingerModel& t = h.fingers[0];
    t.name = "thumb";
    const Vec3d z = Vec3d(0.0, 0.6, 0.8).normalized();
    const Vec3d toward = Vec3d(1.0, -0.6, -0.1);
    const Vec3d x = (toward - toward.dot(z) * z).normalized();
    Mat3d r;
    r.col(0) = x;
    r.col(1) = z.cross(x);
    r.col(2) = z;
    t.base = {r, Vec3d(0.0, 0.04, -0.035)};
    t.axes = {abduction_axis, flexion_axis, flexion_axis};
    t.proximal_length = kProximal;
    t.distal_length = kDistal;
  }

  for (int f = 0; f < kFingerCount; ++f) {
    h.limits.lower[joint_index(Finger(f), JointRole::Abduction)] = -0.26;
    h.limits.upper[joint_index(Finger(f), JointRole::Abduction)] = 0.26;
    for (JointRole r : {JointRole::ProximalFlexion, JointRole::DistalFlexion}) {
      h.limits.lower[joint_index(Finger(f), r)] = 0.0;
      h.limits.upper[joint_index(Finger(f), r)] = 1.57;
    }
  }
  h.rest = JointVector::Zero();

  // 16 palm points on a 4x4 grid, then 22 per finger and 24 on the thumb: 128 total.
  for (double z : {-0.035, -0.012, 0.012, 0.035}) {
    for (double y : {-0.03, -0.01, 0.01, 0.03}) h.surface.push_back({Link::Palm, -1, Vec3d(0.0, y, z)});
  }
  const double a = 0.6;
  add_link_points(h.surface, 0, Link::Proximal, kProximal, {0.2, 0.35, 0.5, 0.65, 0.8, 1.0}, {-a, a});
  add_link_points(h.surface, 0, Link::Distal, kDistal, {0.25, 0.5, 0.75, 1.0}, {-0.8, 0.0, 0.8});
  for (int f = 1; f < kFingerCount; ++f) {
    add_link_points(h.surface, f, Link::Proximal, kProximal, {0.2, 0.4, 0.6, 0.8, 1.0}, {-a, a});
    add_link_points(h.surface, f, Link::Distal, kDistal, {0.25, 0.5, 0.75, 1.0}, {-0.8, 0.0, 0.8});
  }

  using enum Finger;
  h.eigengrasps = {
      make_map(GraspPrimitive::Hook, h.rest, flexion_rows({Index, Middle, Ring, Little})),
      make_map(GraspPrimitive::Cylindrical, h.rest, flexion_rows({Thumb, Index, Middle, Ring, Little})),
      make_map(GraspPrimitive::Pinch, h.rest, flexion_rows({Thumb, Index})),
      make_map(GraspPrimitive::Tripod, h.rest, flexion_rows({Thumb, Index, Middle})),
      make_map(GraspPrimitive::Lumbrical, h.rest,
               flexion_rows({Thumb, Index, Middle, Ring, Little}, /*distal=*/false)),
  };
  h.validate();
  return h;
}

GraspVector Grasp::to_vector() const {
  GraspVector v;
  v << joints, rotation, translation;
  return v;
}

Grasp Grasp::from_vector(const GraspVector& v) {
  Grasp g;
  g.joints = v.head<kJointCount>();
  g.rotation = v.segment<6>(kJointCount);
  g.translation = v.tail<3>();
  return g;
}

Grasp Grasp::from_pose(const Posed& palm, const JointVector& joints) {
  return {joints, rotation_to_rot6d(palm.rotation), palm.translation};
}

Eigen::VectorXd ReducedGrasp::flatten() const {
  Eigen::VectorXd v(dim());
  v << translation, rotation, synergy;
  return v;
}

ReducedGrasp ReducedGrasp::unflatten(const Eigen::VectorXd& v) {
  ReducedGrasp g;
  g.translation = v.head<3>();
  g.rotation = v.segment<6>(3);
  g.synergy = v.tail(v.size() - 9);
  return g;
}

Eigen::Matrix3Xd surface_points_local(const HandModel& hand, const JointVector& joints) {
  std::array<FingerFrames, kFingerCount> frames;
  for (int f = 0; f < kFingerCount; ++f) {
    frames[static_cast<std::size_t>(f)] =
        finger_frames(hand.fingers[static_cast<std::size_t>(f)], joints.data() + f * kJointsPerFinger);
  }
  Eigen::Matrix3Xd out(3, hand.surface_count());
  for (Eigen::Index i = 0; i < hand.surface_count(); ++i) {
    const SurfacePoint& sp = hand.surface[static_cast<std::size_t>(i)];
    switch (sp.link) {
      case Link::Palm: out.col(i) = sp.local; break;
      case Link::Proximal: out.col(i) = frames[static_cast<std::size_t>(sp.finger)].proximal * sp.local; break;
      case Link::Distal: out.col(i) = frames[static_cast<std::size_t>(sp.finger)].distal * sp.local; break;
    }
  }
  return out;
}

Eigen::Matrix3Xd forward_kinematics(const HandModel& hand, const Posed& palm, const JointVector& joints) {
  return palm.apply(surface_points_local(hand, joints));
}

JointFrames joint_frames(const HandModel& hand, const JointVector& joints) {
  JointFrames out;
  for (int f = 0; f < kFingerCount; ++f) {
    const FingerModel& fm = hand.fingers[static_cast<std::size_t>(f)];
    const double* q = joints.data() + f * kJointsPerFinger;
    const Mat3d after_abduction = fm.base.rotation * axis_rotation(fm.axes[0], q[0]);
    const FingerFrames fr = finger_frames(fm, q);
    const auto j0 = static_cast<std::size_t>(f * kJointsPerFinger);
    out.origin[j0] = fm.base.translation;
    out.axis[j0] = fm.base.rotation * fm.axes[0];
    out.origin[j0 + 1] = fm.base.translation;
    out.axis[j0 + 1] = after_abduction * fm.axes[1];
    out.origin[j0 + 2] = fr.distal.translation;
    out.axis[j0 + 2] = fr.proximal.rotation * fm.axes[2];
  }
  return out;
}

std::vector<int> joints_moving(int finger, Link link) {
  if (link == Link::Palm || finger < 0) return {};
  const int base = finger * kJointsPerFinger;
  if (link == Link::Proximal) return {base, base + 1};
  return {base, base + 1, base + 2};
}

Grasp eigen_expand(const ReducedGrasp& g, const EigengraspMap& map, const JointLimits& limits) {
  if (g.synergy.size() != map.synergy_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "synergy length differs from eigengrasp dimension");
  }
  Grasp out;
  out.joints = map.rest;
  for (int r = 0; r < kJointCount; ++r) {
    if (!map.active[static_cast<std::size_t>(r)]) continue;
    const double v = map.rest[r] + map.expansion.row(r).dot(g.synergy);
    out.joints[r] = std::clamp(v, limits.lower[r], limits.upper[r]);
  }
  out.rotation = g.rotation;
  out.translation = g.translation;
  return out;
}

ReducedGrasp eigen_project(const Grasp& g, const EigengraspMap& map) {
  std::vector<int> rows;
  for (int r = 0; r < kJointCount; ++r) {
    if (map.active[static_cast<std::size_t>(r)]) rows.push_back(r);
  }
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), map.synergy_dim());
  Eigen::VectorXd delta(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    w.row(static_cast<Eigen::Index>(i)) = map.expansion.row(rows[i]);
    delta[static_cast<Eigen::Index>(i)] = g.joints[rows[i]] - map.rest[rows[i]];
  }
  ReducedGrasp out;
  out.translation = g.translation;
  out.rotation = g.rotation;
  out.synergy = w.completeOrthogonalDecomposition().solve(delta);
  return out;
}

std::string hand_to_json_text(const HandModel& hand) {
  json j;
  j["format"] = "lensdff.hand";
  j["version"] = kHandFormatVersion;
  j["name"] = hand.name;
  j["units"] = {{"length", "m"}, {"angle", "rad"}};
  json fingers = json::array();
  for (int f = 0; f < kFingerCount; ++f) {
    const FingerModel& fm = hand.fingers[static_cast<std::size_t>(f)];
    json rot = json::array();
    for (int r = 0; r < 3; ++r) rot.push_back(json::array({fm.base.rotation(r, 0), fm.base.rotation(r, 1), fm.base.rotation(r, 2)}));
    json limits = json::array();
    json rest = json::array();
    for (int k = 0; k < kJointsPerFinger; ++k) {
      const int idx = f * kJointsPerFinger + k;
      limits.push_back(json::array({hand.limits.lower[idx], hand.limits.upper[idx]}));
      rest.push_back(hand.rest[idx]);
    }
    fingers.push_back({{"name", kFingerNames[static_cast<std::size_t>(f)]},
                       {"base", {{"rotation", rot}, {"translation", vec_json(fm.base.translation)}}},
                       {"axes", json::array({vec_json(fm.axes[0]), vec_json(fm.axes[1]), vec_json(fm.axes[2])})},
                       {"link_lengths", json::array({fm.proximal_length, fm.distal_length})},
                       {"limits", limits},
                       {"rest", rest}});
  }
  j["fingers"] = fingers;
  json surface = json::array();
  for (const auto& sp : hand.surface) {
    json p = {{"link", to_string(sp.link)}, {"position", vec_json(sp.local)}};
    p["finger"] = sp.finger < 0 ? json(nullptr) : json(kFingerNames[static_cast<std::size_t>(sp.finger)]);
    surface.push_back(p);
  }
  j["surface_points"] = surface;
  json prims = json::array();
  for (const auto& m : hand.eigengrasps) {
    json cols = json::array();
    for (Eigen::Index c = 0; c < m.expansion.cols(); ++c) {
      json col = json::array();
      for (int r = 0; r < kJointCount; ++r) col.push_back(m.expansion(r, c));
      cols.push_back(col);
    }
    json active = json::array();
    for (int r = 0; r < kJointCount; ++r) {
      if (m.active[static_cast<std::size_t>(r)]) active.push_back(r);
    }
    prims.push_back({{"name", to_string(m.primitive)}, {"synergies", cols}, {"active_joints", active}});
  }
  j["primitives"] = prims;
  return j.dump(2) + "\n";
}

HandModel hand_from_json_text(std::string_view text) {
  HandModel h;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "lensdff.hand") {
      throw Error(ErrorCode::MalformedFile, "not a hand description");
    }
    if (j.at("version").get<int>() != kHandFormatVersion) {
      throw Error(ErrorCode::MalformedFile, "unsupported hand format version " + j.at("version").dump());
    }
    h.name = j.at("name").get<std::string>();
    const json& fingers = j.at("fingers");
    if (fingers.size() != kFingerCount) throw Error(ErrorCode::MalformedFile, "hand needs exactly 5 fingers");
    for (int f = 0; f < kFingerCount; ++f) {
      const json& jf = fingers[static_cast<std::size_t>(f)];
      if (finger_from_name(jf.at("name").get<std::string>()) != f) {
        throw Error(ErrorCode::MalformedFile, "fingers must be listed thumb, index, middle, ring, little");
      }
      FingerModel& fm = h.fingers[static_cast<std::size_t>(f)];
      fm.name = jf.at("name").get<std::string>();
      const json& rot = jf.at("base").at("rotation");
      for (int r = 0; r < 3; ++r) fm.base.rotation.row(r) = vec_from(rot.at(static_cast<std::size_t>(r))).transpose();
      fm.base.translation = vec_from(jf.at("base").at("translation"));
      for (int k = 0; k < 3; ++k) fm.axes[static_cast<std::size_t>(k)] = vec_from(jf.at("axes").at(static_cast<std::size_t>(k)));
      fm.proximal_length = jf.at("link_lengths").at(0).get<double>();
      fm.distal_length = jf.at("link_lengths").at(1).get<double>();
      for (int k = 0; k < kJointsPerFinger; ++k) {
        const int idx = f * kJointsPerFinger + k;
        h.limits.lower[idx] = jf.at("limits").at(static_cast<std::size_t>(k)).at(0).get<double>();
        h.limits.upper[idx] = jf.at("limits").at(static_cast<std::size_t>(k)).at(1).get<double>();
        h.rest[idx] = jf.at("rest").at(static_cast<std::size_t>(k)).get<double>();
      }
    }
    for (const json& p : j.at("surface_points")) {
      SurfacePoint sp;
      sp.link = link_from_name(p.at("link").get<std::string>());
      sp.finger = p.at("finger").is_null() ? -1 : finger_from_name(p.at("finger").get<std::string>());
      sp.local = vec_from(p.at("position"));
      h.surface.push_back(sp);
    }
    for (const json& p : j.at("primitives")) {
      const auto prim = parse_primitive(p.at("name").get<std::string>());
      if (!prim) throw Error(ErrorCode::MalformedFile, "unknown primitive " + p.at("name").dump());
      EigengraspMap m;
      m.primitive = *prim;
      m.rest = h.rest;
      const json& cols = p.at("synergies");
      m.expansion.resize(kJointCount, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].size() != kJointCount) throw Error(ErrorCode::MalformedFile, "synergy column needs 15 entries");
        for (int r = 0; r < kJointCount; ++r) m.expansion(r, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(r)].get<double>();
      }
      for (const json& a : p.at("active_joints")) {
        const int r = a.get<int>();
        if (r < 0 || r >= kJointCount) throw Error(ErrorCode::MalformedFile, "active joint out of range");
        m.active[static_cast<std::size_t>(r)] = true;
      }
      h.eigengrasps.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("hand description: ") + e.what());
  }
  try {
    h.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedFile, e.what());
  }
  return h;
}

HandModel load_hand(const std::string& path) { return hand_from_json_text(io::read_file(path)); }

void save_hand(const HandModel& hand, const std::string& path) {
  io::write_file(path, hand_to_json_text(hand));
}

std::string hand_fingerprint(const HandModel& hand) {
  const std::string text = hand_to_json_text(hand);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace lensdff
