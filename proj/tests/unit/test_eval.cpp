#include <numbers>
#include <sstream>

#include "lensdff/eval.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

const HandModel& hand() {
  static const HandModel h = make_default_hand();
  return h;
}

PointCloud sphere(double radius, const Vec3d& center, int rings = 40) {
  PointCloud pc;
  std::vector<Vec3d> pts;
  for (int i = 0; i <= rings; ++i) {
    const double th = std::numbers::pi * i / rings;
    const int around = std::max(1, static_cast<int>(2 * rings * std::sin(th)));
    for (int j = 0; j < around; ++j) {
      const double ph = 2 * std::numbers::pi * j / around;
      pts.emplace_back(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    }
  }
  pc.points.resize(3, static_cast<Eigen::Index>(pts.size()));
  pc.normals = Eigen::Matrix3Xd(3, pc.points.cols());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pc.points.col(static_cast<Eigen::Index>(i)) = center + radius * pts[i];
    pc.normals->col(static_cast<Eigen::Index>(i)) = pts[i];
  }
  return pc;
}

Grasp rest_grasp() {
  Grasp g;
  g.joints = hand().rest;
  return g;
}

// One distal point per listed finger, with normals facing the palm.
PointCloud fingertip_points(const Grasp& g, std::initializer_list<int> fingers) {
  const Eigen::Matrix3Xd q = forward_kinematics(hand(), g.palm(), g.joints);
  std::vector<Eigen::Index> picked;
  for (int f : fingers) {
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      const auto& sp = hand().surface[static_cast<std::size_t>(i)];
      if (sp.finger == f && sp.link == Link::Distal) {
        picked.push_back(i);
        break;
      }
    }
  }
  PointCloud pc;
  pc.points.resize(3, static_cast<Eigen::Index>(picked.size()));
  pc.normals = Eigen::Matrix3Xd(3, pc.points.cols());
  for (std::size_t k = 0; k < picked.size(); ++k) {
    const Vec3d p = q.col(picked[k]);
    pc.points.col(static_cast<Eigen::Index>(k)) = p;
    pc.normals->col(static_cast<Eigen::Index>(k)) = (g.translation - p).normalized();
  }
  return pc;
}

PointCloud concat(const PointCloud& a, const PointCloud& b) {
  PointCloud pc;
  pc.points.resize(3, a.size() + b.size());
  pc.points << a.points, b.points;
  pc.normals = Eigen::Matrix3Xd(3, a.size() + b.size());
  *pc.normals << *a.normals, *b.normals;
  return pc;
}

BenchmarkConfig tiny_benchmark() {
  BenchmarkConfig cfg;
  cfg.scenes = 1;
  cfg.optimizer.iterations = 15;
  cfg.optimizer.n_seeds = 3;
  cfg.threads = 1;
  return cfg;
}

AblationReport sample_report() {
  AblationReport r;
  r.seed = 5;
  r.alignment.push_back({"alignment", "none", 30, 1, 3, 0.1, 2.5});
  r.alignment.push_back({"alignment", "enhance", 30, 0, 6, 0.2, 1.25});
  r.representation.push_back({"representation", "multi-demo/single-test", 30, 0, 6, 0.2, 1.0 / 3.0});
  r.cells.push_back({0, "ball-0-0", "alignment", "none", "ball", "raw", 3, 0, 1, 2.0, ""});
  r.cells.push_back({0, "box-0-1", "alignment", "enhance", "", "test", 3, 3, 0, 0.0, "NoDemoForPrimitive: x"});
  return r;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("a distant hand makes no contact") {
    Grasp g = rest_grasp();
    g.translation = Vec3d(5, 5, 5);
    const StabilityReport r = contact_check(g, hand(), sphere(0.05, Vec3d::Zero()));
    CHECK(r.contact_count == 0);
    CHECK_FALSE(r.success);
    CHECK(r.min_clearance > 4.0);
  }

  TEST_CASE("three touching fingertips succeed") {
    Grasp g = rest_grasp();
    g.translation = Vec3d(0.3, -0.2, 0.1);
    const PointCloud tips = fingertip_points(g, {0, 1, 2});
    const StabilityReport r = contact_check(g, hand(), tips);
    CHECK(r.contact_count == 3);
    CHECK(r.finger_contact[0]);
    CHECK(r.finger_contact[2]);
    CHECK_FALSE(r.finger_contact[4]);
    CHECK(r.penetrating_palm_points == 0);
    CHECK(r.success);
    CHECK_FALSE(contact_check(g, hand(), fingertip_points(g, {1, 2})).success);
  }

  TEST_CASE("palm inside the object fails through the penetration clause") {
    const Grasp g = rest_grasp();
    const PointCloud object = concat(sphere(0.08, g.translation), fingertip_points(g, {0, 1, 2, 3}));
    const StabilityReport r = contact_check(g, hand(), object);
    CHECK(r.contact_count >= 3);
    CHECK(r.penetrating_palm_points > 0);
    CHECK(r.min_palm_clearance < -0.01);
    CHECK_FALSE(r.success);
  }

  TEST_CASE("closing fingers stops at the surface") {
    Grasp g = rest_grasp();
    const PointCloud ball = sphere(0.04, Vec3d(0.06, 0.0, 0.09));
    const SurfaceQuery q(ball);
    const auto& map = hand().eigengrasp(GraspPrimitive::Cylindrical);
    const Grasp closed = close_fingers(g, hand(), map, q);
    CHECK(closed.translation == g.translation);
    for (int r = 0; r < kJointCount; ++r) {
      CHECK(closed.joints[r] >= hand().limits.lower[r]);
      CHECK(closed.joints[r] <= hand().limits.upper[r]);
      if (!map.active[static_cast<std::size_t>(r)]) CHECK(closed.joints[r] == g.joints[r]);
    }
    CHECK((closed.joints - g.joints).norm() > 0.0);
  }

  TEST_CASE("enhance and gated modes agree without any inconsistency") {
    BenchmarkConfig cfg = tiny_benchmark();
    cfg.view_noise = 0.0;
    cfg.representation_rows = false;
    const SyntheticWorld world = make_world(cfg.synthetic, cfg.seed);
    SyntheticScene scene = make_scene(world, 0, cfg.objects_per_scene);
    // Demo prompts are stored at f32 precision inside the bundle.
    for (auto& o : scene.objects) {
      o.language = world.demo_language[static_cast<std::size_t>(o.category)];
      o.language.feature = o.language.feature.cast<float>().cast<double>();
    }
    const AblationReport rep = run_ablation(world, {scene}, hand(), cfg);
    const AblationRow& enhance = rep.row("alignment", "enhance");
    const AblationRow& gate = rep.row("alignment", "enhance+gate");
    CHECK(enhance.mean_final_e_feat == gate.mean_final_e_feat);
    CHECK(enhance.success_count == gate.success_count);
    CHECK(enhance.grasp_count > 0);
  }

  TEST_CASE("report rows share grasp counts") {
    const AblationReport rep = run_benchmark(tiny_benchmark(), hand());
    REQUIRE(rep.alignment.size() == 3);
    REQUIRE(rep.representation.size() == 4);
    const int n = rep.alignment.front().grasp_count;
    CHECK(n == tiny_benchmark().objects_per_scene * tiny_benchmark().optimizer.n_seeds);
    for (const auto* rows : {&rep.alignment, &rep.representation}) {
      for (const auto& r : *rows) {
        CHECK(r.grasp_count == n);
        CHECK(r.success_rate == doctest::Approx(double(r.success_count) / n));
      }
    }
    CHECK(rep.row("representation", "multi-demo/single-test").mean_final_e_feat ==
          rep.row("alignment", "enhance+gate").mean_final_e_feat);
    CHECK_ERROR_CODE(rep.row("alignment", "nope"), ErrorCode::InvalidConfig);
  }

  TEST_CASE("empty report gives a header-only CSV") {
    CHECK(report_to_csv(AblationReport{}) ==
          "section,mode,grasp_count,failed_count,success_count,success_rate,mean_final_e_feat\n");
  }

  TEST_CASE("CSV rows carry every column") {
    std::istringstream in(report_to_csv(sample_report()));
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
      CHECK(std::count(line.begin(), line.end(), ',') == static_cast<long>(kReportCsvColumns.size()) - 1);
      ++lines;
    }
    CHECK(lines == 4);
  }

  TEST_CASE("JSON round trip is stable") {
    const std::string a = report_to_json(sample_report());
    const AblationReport back = report_from_json(a);
    CHECK(report_to_json(back) == a);
    CHECK(back.representation.at(0).mean_final_e_feat == 1.0 / 3.0);
    CHECK(back.cells.at(1).error == "NoDemoForPrimitive: x");
    CHECK_ERROR_CODE(report_from_json("{\"alignment\": 3}"), ErrorCode::MalformedFile);
  }

  TEST_CASE("eval settings") {
    EvalConfig cfg;
    cfg.contact_delta = -1.0;
    CHECK_ERROR_CODE(cfg.validate(), ErrorCode::InvalidConfig);
  }
}
