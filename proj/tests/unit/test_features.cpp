#include <array>
#include <cmath>
#include <set>

#include "lensdff/features.hpp"
#include "lensdff/random.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

LanguageFeature lang(std::initializer_list<double> v, LanguageSource s = LanguageSource::Demo) {
  FeatureVec f(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) f[i++] = x;
  return {f, s};
}

ViewFeatureCloud single_point_view(const Vec3d& p, const FeatureVec& f) {
  ViewFeatureCloud v;
  v.cloud.points = p;
  v.features = f;
  v.camera_pose.translation = Vec3d(0, 0, 1);
  return v;
}

ViewFeatureCloud random_view(Rng& rng, int n, int dim, double span) {
  std::uniform_real_distribution<double> u(0.0, span);
  std::normal_distribution<double> g(0.0, 1.0);
  ViewFeatureCloud v;
  v.cloud.points.resize(3, n);
  v.features.resize(dim, n);
  for (int i = 0; i < n; ++i) {
    v.cloud.points.col(i) = Vec3d(u(rng), u(rng), u(rng));
    for (int d = 0; d < dim; ++d) v.features(d, i) = g(rng);
  }
  v.camera_pose.translation = Vec3d(0, 0, 2);
  return v;
}

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("enhancement coefficients") {
    const LanguageFeature f = lang({0.3, -1.2, 0.7, 2.0});
    const FeatureVec orth = (FeatureVec(4) << 1.2, 0.3, 0.0, 0.0).finished();
    REQUIRE(orth.dot(f.feature) == 0.0);
    CHECK(enhance_coefficient(f.feature, f) == doctest::Approx(0.7310586).epsilon(1e-6));
    CHECK(enhance_coefficient(orth, f) == 0.5);
    CHECK(enhance_coefficient(-f.feature, f) == doctest::Approx(0.2689414).epsilon(1e-6));
    CHECK(enhance_coefficient(2.0 * f.feature, f) == doctest::Approx(0.8807971).epsilon(1e-6));
    CHECK((language_enhance(orth, f) - 0.5 * f.feature).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("column-wise enhancement matches the vector form") {
    Rng rng = make_rng(1, 0);
    const ViewFeatureCloud v = random_view(rng, 20, 6, 1.0);
    const LanguageFeature f = lang({1, 2, 3, -1, 0.5, 0});
    const Eigen::MatrixXd all = language_enhance(v.features, f);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      CHECK((all.col(i) - language_enhance(FeatureVec(v.features.col(i)), f)).norm() < 1e-14);
    }
  }

  TEST_CASE("zero language feature and dimension errors") {
    const LanguageFeature zero = lang({0, 0, 0});
    CHECK_ERROR_CODE(language_enhance(FeatureVec(FeatureVec::Ones(3)), zero), ErrorCode::ZeroLanguageFeature);
    CHECK_ERROR_CODE(language_enhance(FeatureVec(FeatureVec::Ones(4)), lang({1, 0, 0})), ErrorCode::DimensionMismatch);
    CHECK_ERROR_CODE(gate_language(lang({1, 0}), lang({1, 0, 0})), ErrorCode::DimensionMismatch);
  }

  TEST_CASE("gate keeps the demo feature on agreement") {
    const LanguageFeature demo = lang({1, 2, 3});
    const LanguageFeature out = gate_language(demo, lang({1, 2, 3}, LanguageSource::Test));
    CHECK(out.feature == demo.feature);
    CHECK(out.source == LanguageSource::Demo);
  }

  TEST_CASE("gate averages orthogonal prompts") {
    const LanguageFeature out = gate_language(lang({2, 0}), lang({0, 4}, LanguageSource::Test));
    CHECK(out.feature == (FeatureVec(2) << 1, 2).finished());
    CHECK(out.source == LanguageSource::Fused);
  }

  TEST_CASE("gate boundary is inclusive") {
    // cos((63,77,10,1,1), e1) = 63 / 100 exactly.
    const LanguageFeature demo = lang({1, 0, 0, 0, 0});
    const LanguageFeature test = lang({63, 77, 10, 1, 1}, LanguageSource::Test);
    REQUIRE(cosine_similarity(demo.feature, test.feature) == 0.63);
    CHECK(gate_language(demo, test, 0.63).source == LanguageSource::Demo);
    CHECK(gate_language(demo, test, 0.64).source == LanguageSource::Fused);
  }

  TEST_CASE("distilling one point") {
    const LanguageFeature f = lang({0.5, -1, 2});
    const std::array views{single_point_view(Vec3d(0.1, 0.2, 0.3), f.feature)};
    const DistilledCloud d = distill_views(views, f);
    REQUIRE(d.size() == 1);
    CHECK(d.points.col(0) == Vec3d(0.1, 0.2, 0.3));
    CHECK((d.features.col(0) - sigmoid(1.0) * f.feature).norm() < 1e-15);
    CHECK((d.normals.col(0) - (Vec3d(0, 0, 1) - Vec3d(0.1, 0.2, 0.3)).normalized()).norm() < 1e-15);
    CHECK(d.language.feature == f.feature);
  }

  TEST_CASE("four views of one point give collinear features") {
    Rng rng = make_rng(2, 0);
    std::normal_distribution<double> g(0.0, 1.0);
    const LanguageFeature f = lang({1, -2, 0.5, 3, 0});
    std::vector<ViewFeatureCloud> views;
    for (int i = 0; i < 4; ++i) views.push_back(single_point_view(Vec3d(0, 0, 0), FeatureVec::NullaryExpr(5, [&] { return g(rng); })));
    REQUIRE(cosine_similarity(views[0].features.col(0), views[1].features.col(0)) < 0.99);
    const DistilledCloud d = distill_views(views, f);
    REQUIRE(d.size() == 4);
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        CHECK(cosine_similarity(d.features.col(a), d.features.col(b)) == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
    const DistilledCloud raw = fuse_views_raw(views, f);
    CHECK(raw.features.col(2) == views[2].features.col(0));
  }

  TEST_CASE("voxel downsampling counts") {
    Rng rng = make_rng(3, 0);
    const std::vector<ViewFeatureCloud> views{random_view(rng, 100, 4, 0.1), random_view(rng, 100, 4, 0.1)};
    const LanguageFeature f = lang({1, 1, 0, 0});
    CHECK(distill_views(views, f, {.voxel = 0.0}).size() == 200);
    CHECK(distill_views(views, f, {}).size() == 200);
    CHECK(distill_views(views, f, {.voxel = 10.0}).size() == 1);

    // Brute-force binning oracle.
    Eigen::Matrix3Xd all(3, 200);
    all << views[0].cloud.points, views[1].cloud.points;
    const Vec3d lo = all.rowwise().minCoeff();
    std::set<std::array<long, 3>> cells;
    for (Eigen::Index i = 0; i < all.cols(); ++i) {
      const Vec3d c = ((all.col(i) - lo) / 0.03).array().floor();
      cells.insert({long(c[0]), long(c[1]), long(c[2])});
    }
    CHECK(distill_views(views, f, {.voxel = 0.03}).size() == static_cast<Eigen::Index>(cells.size()));
  }

  TEST_CASE("distill rejects empty input and mismatched dimensions") {
    const LanguageFeature f = lang({1, 0, 0});
    CHECK_ERROR_CODE(distill_views(std::span<const ViewFeatureCloud>(), f), ErrorCode::EmptyInput);
    const std::vector<ViewFeatureCloud> views{single_point_view(Vec3d::Zero(), FeatureVec::Ones(3)),
                                              single_point_view(Vec3d::Zero(), FeatureVec::Ones(4))};
    CHECK_ERROR_CODE(distill_views(views, f), ErrorCode::DimensionMismatch);
    ViewFeatureCloud bad = single_point_view(Vec3d::Zero(), FeatureVec::Ones(3));
    bad.features = Eigen::MatrixXd::Ones(3, 2);
    CHECK_ERROR_CODE(bad.validate(), ErrorCode::DimensionMismatch);
  }

  TEST_CASE("grasp feature of a single-point cloud") {
    DistilledCloud c;
    c.points = Vec3d(1, 2, 3);
    c.features = (Eigen::MatrixXd(3, 1) << 0.25, -0.5, 1.0).finished();
    Eigen::Matrix3Xd q(3, 4);
    q << 0, 1, 5, -2, 0, 0, 5, 3, 0, 1, 5, 1;
    const GraspFeature g = grasp_feature(c, q);
    REQUIRE(g.count() == 4);
    for (Eigen::Index n = 0; n < 4; ++n) CHECK((g.blocks.col(n) - c.features.col(0)).norm() < 1e-15);
  }

  TEST_CASE("grasp feature weights") {
    DistilledCloud c;
    c.points.resize(3, 2);
    c.points << 1, -1, 0, 0, 0, 0;
    c.features = (Eigen::MatrixXd(2, 2) << 1, 0, 0, 1).finished();
    const GraspFeature mid = grasp_feature(c, Eigen::Matrix3Xd(Vec3d::Zero()), {.k = 2});
    CHECK((mid.blocks.col(0) - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);

    c.points << 1, 2, 0, 0, 0, 0;
    const GraspFeature skew = grasp_feature(c, Eigen::Matrix3Xd(Vec3d::Zero()), {.k = 2, .eps = 1e-12});
    CHECK(skew.blocks(0, 0) == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(skew.blocks(1, 0) == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(skew.mean_block() == skew.blocks.col(0));
  }

  TEST_CASE("grasp feature of an empty cloud") {
    CHECK_ERROR_CODE(grasp_feature(DistilledCloud{}, Eigen::Matrix3Xd(Vec3d::Zero())), ErrorCode::EmptyCloud);
  }
}
