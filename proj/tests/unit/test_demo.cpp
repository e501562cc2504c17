#include <filesystem>

#include "lensdff/demo.hpp"
#include "lensdff/random.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

const HandModel& hand() {
  static const HandModel h = make_default_hand();
  return h;
}

Grasp demo_grasp() {
  Grasp g;
  g.translation = Vec3d(0.0, 0.0, 0.1);
  g.rotation = rotation_to_rot6d(Eigen::AngleAxisd(0.4, Vec3d::UnitY()).toRotationMatrix());
  g.joints = hand().eigengrasp(GraspPrimitive::Tripod).rest;
  return g;
}

DistilledCloud cloud_with(const Eigen::MatrixXd& features, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  std::normal_distribution<double> g(0.0, 0.05);
  DistilledCloud c;
  c.points = Eigen::Matrix3Xd::NullaryExpr(3, features.cols(), [&] { return g(rng); });
  c.normals = Eigen::Matrix3Xd::Zero(3, features.cols());
  c.normals.row(2).setOnes();
  c.features = features;
  c.language = {FeatureVec::Ones(features.rows()), LanguageSource::Demo};
  return c;
}

DistilledCloud random_cloud(int n, int dim, std::uint64_t seed) {
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> g(0.0, 1.0);
  return cloud_with(Eigen::MatrixXd::NullaryExpr(dim, n, [&] { return g(rng); }), seed);
}

// Every point carries `f`, so the cached mean block is exactly `f`.
DemoRecord constant_record(const std::string& id, const FeatureVec& f, GraspPrimitive p) {
  return make_demo_record(id, id, p, demo_grasp(), cloud_with(f.replicate(1, 30), 5), hand());
}

DemoBundle sample_bundle() {
  std::vector<DemoRecord> recs;
  recs.push_back(make_demo_record("mug", "grasp the mug", GraspPrimitive::Cylindrical, demo_grasp(),
                                  random_cloud(60, 6, 1), hand()));
  recs.push_back(make_demo_record("ball", "pick up the ball", GraspPrimitive::Tripod, demo_grasp(),
                                  random_cloud(40, 6, 2), hand()));
  return make_bundle(hand(), std::move(recs));
}

void set_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

}  // namespace

TEST_SUITE("demo") {
  TEST_CASE("cache equals recomputation") {
    const DemoBundle b = sample_bundle();
    for (const auto& r : b.records) {
      const GraspFeature fresh = grasp_feature(r.cloud, forward_kinematics(hand(), r.g_gt.palm(), r.g_gt.joints));
      CHECK((fresh.blocks - r.cached_grasp_feature.blocks).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(r.cached_grasp_feature.count() == hand().surface_count());
    }
    CHECK_NOTHROW(b.validate(hand()));
  }

  TEST_CASE("bundle round trip") {
    const DemoBundle b = sample_bundle();
    const std::string bytes = encode_bundle(b);
    const DemoBundle back = decode_bundle(bytes, hand());
    REQUIRE(back.records.size() == 2);
    CHECK(back.hand_fingerprint == b.hand_fingerprint);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back.records[i].id == b.records[i].id);
      CHECK(back.records[i].prompt_text == b.records[i].prompt_text);
      CHECK(back.records[i].primitive == b.records[i].primitive);
      CHECK(back.records[i].g_gt.to_vector() == b.records[i].g_gt.to_vector());
      CHECK(back.records[i].cloud.features == b.records[i].cloud.features);
      CHECK(back.records[i].cached_grasp_feature.blocks == b.records[i].cached_grasp_feature.blocks);
    }
    CHECK(encode_bundle(back) == bytes);
  }

  TEST_CASE("file round trip") {
    const auto path = (std::filesystem::temp_directory_path() / "lensdff_demo_test.demo").string();
    const DemoBundle b = sample_bundle();
    save_bundle(b, path);
    CHECK(encode_bundle(load_bundle(path, hand())) == encode_bundle(b));
    std::filesystem::remove(path);
  }

  TEST_CASE("corrupt cached feature") {
    std::string bytes = encode_bundle(sample_bundle());
    // The last record's cache is the tail of the file; bump its final f64.
    bytes[bytes.size() - 2] = static_cast<char>(bytes[bytes.size() - 2] ^ 0x10);
    CHECK_ERROR_CODE(decode_bundle(bytes, hand()), ErrorCode::CacheMismatch);

    DemoBundle b = sample_bundle();
    b.records[0].cached_grasp_feature.blocks(0, 0) += 1e-3;
    CHECK_ERROR_CODE(b.validate(hand()), ErrorCode::CacheMismatch);
  }

  TEST_CASE("bundle for a different hand") {
    HandModel other = make_default_hand();
    other.name = "other";
    other.limits.upper[1] = 1.2;
    CHECK_ERROR_CODE(decode_bundle(encode_bundle(sample_bundle()), other), ErrorCode::CacheMismatch);
  }

  TEST_CASE("unknown version") {
    std::string bytes = encode_bundle(sample_bundle());
    set_u32(bytes, 4, 2);
    try {
      decode_bundle(bytes, hand());
      FAIL("expected MalformedFile");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedFile);
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
  }

  TEST_CASE("bad magic and truncation") {
    std::string bytes = encode_bundle(sample_bundle());
    CHECK_ERROR_CODE(decode_bundle(bytes.substr(0, bytes.size() / 2), hand()), ErrorCode::MalformedFile);
    bytes[0] = 'X';
    CHECK_ERROR_CODE(decode_bundle(bytes, hand()), ErrorCode::MalformedFile);
  }

  TEST_CASE("duplicate ids are rejected") {
    std::vector<DemoRecord> recs{constant_record("a", FeatureVec::Ones(2), GraspPrimitive::Hook),
                                 constant_record("a", FeatureVec::Ones(2), GraspPrimitive::Hook)};
    CHECK_ERROR_CODE(make_bundle(hand(), std::move(recs)).validate(hand()), ErrorCode::MalformedFile);
  }

  TEST_CASE("single matching record") {
    std::vector<DemoRecord> recs{constant_record("hook", FeatureVec::Ones(2), GraspPrimitive::Hook),
                                 constant_record("cyl", FeatureVec::Ones(2), GraspPrimitive::Cylindrical)};
    const DemoBundle b = make_bundle(hand(), std::move(recs));
    const LanguageFeature q{(FeatureVec(2) << -1, 0.5).finished(), LanguageSource::Test};
    CHECK(retrieve(b, q, GraspPrimitive::Cylindrical).id == "cyl");
    CHECK(retrieve(b, q, GraspPrimitive::Hook).id == "hook");
  }

  TEST_CASE("highest cosine wins and scale does not matter") {
    std::vector<DemoRecord> recs{
        constant_record("low", (FeatureVec(2) << 0.1, std::sqrt(0.99)).finished(), GraspPrimitive::Tripod),
        constant_record("high", (FeatureVec(2) << 0.9, std::sqrt(0.19)).finished(), GraspPrimitive::Tripod)};
    const DemoBundle b = make_bundle(hand(), std::move(recs));
    const LanguageFeature q{(FeatureVec(2) << 1, 0).finished(), LanguageSource::Test};
    CHECK(retrieve(b, q, GraspPrimitive::Tripod).id == "high");
    const LanguageFeature scaled{25.0 * q.feature, LanguageSource::Test};
    CHECK(retrieve(b, scaled, GraspPrimitive::Tripod).id == "high");
    CHECK(retrieve(b, q, GraspPrimitive::Tripod, RetrievalReduce::Max).id == "high");
  }

  TEST_CASE("ties go to the smallest id") {
    std::vector<DemoRecord> recs{constant_record("b", FeatureVec::Ones(2), GraspPrimitive::Hook),
                                 constant_record("a", FeatureVec::Ones(2), GraspPrimitive::Hook)};
    const DemoBundle b = make_bundle(hand(), std::move(recs));
    CHECK(retrieve(b, {FeatureVec::Ones(2), LanguageSource::Test}, GraspPrimitive::Hook).id == "a");
  }

  TEST_CASE("matches an exhaustive argmax") {
    Rng rng = make_rng(12, 0);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<DemoRecord> recs;
    for (int i = 0; i < 20; ++i) {
      const GraspPrimitive p = kAllPrimitives[static_cast<std::size_t>(i % 2 == 0 ? 1 : 3)];
      recs.push_back(make_demo_record("r" + std::to_string(10 + i), "p", p, demo_grasp(),
                                      random_cloud(25, 5, 100 + static_cast<std::uint64_t>(i)), hand()));
    }
    const DemoBundle b = make_bundle(hand(), std::move(recs));
    for (int trial = 0; trial < 10; ++trial) {
      const LanguageFeature q{FeatureVec::NullaryExpr(5, [&] { return g(rng); }), LanguageSource::Test};
      for (GraspPrimitive p : {GraspPrimitive::Cylindrical, GraspPrimitive::Tripod}) {
        std::size_t best = 0;
        double score = -2.0;
        for (std::size_t i = 0; i < b.records.size(); ++i) {
          if (b.records[i].primitive != p) continue;
          const double s = cosine_similarity(b.records[i].cached_grasp_feature.mean_block(), q.feature);
          if (s > score) {
            score = s;
            best = i;
          }
        }
        CHECK(retrieve_index(b, q, p) == best);
      }
    }
  }

  TEST_CASE("missing primitive") {
    const DemoBundle b = sample_bundle();
    CHECK_ERROR_CODE(retrieve(b, {FeatureVec::Ones(6), LanguageSource::Test}, GraspPrimitive::Pinch),
                     ErrorCode::NoDemoForPrimitive);
  }

  TEST_CASE("reduce names") {
    CHECK(parse_retrieval_reduce("mean") == RetrievalReduce::Mean);
    CHECK(parse_retrieval_reduce("max") == RetrievalReduce::Max);
    CHECK_ERROR_CODE(parse_retrieval_reduce("median"), ErrorCode::InvalidConfig);
  }
}
