#include <algorithm>

#include "lensdff/random.hpp"
#include "lensdff/spatial_index.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

std::vector<Neighbor> brute_force(const Eigen::Matrix3Xd& pts, const Vec3d& q, Eigen::Index k) {
  std::vector<Neighbor> all;
  for (Eigen::Index i = 0; i < pts.cols(); ++i) all.push_back({i, (pts.col(i) - q).squaredNorm()});
  std::sort(all.begin(), all.end());
  all.resize(static_cast<std::size_t>(std::min<Eigen::Index>(k, pts.cols())));
  return all;
}

Eigen::Matrix3Xd line3() {
  Eigen::Matrix3Xd pts(3, 3);
  pts << 0, 1, 2, 0, 0, 0, 0, 0, 0;
  return pts;
}

}  // namespace

TEST_SUITE("spatial_index") {
  TEST_CASE("nearest point on a line") {
    const SpatialIndex index(line3());
    const auto r = index.knn(Vec3d(0.1, 0, 0), 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].index == 0);
    CHECK(r[0].distance() == doctest::Approx(0.1).epsilon(1e-12));
  }

  TEST_CASE("ties go to the smaller index") {
    const SpatialIndex index(line3());
    const auto r = index.knn(Vec3d(1.5, 0, 0), 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].index == 1);
    const auto both = index.knn(Vec3d(1.5, 0, 0), 2);
    CHECK(both[0].index == 1);
    CHECK(both[1].index == 2);
  }

  TEST_CASE("k larger than the point count is clamped") {
    const SpatialIndex index(line3());
    CHECK(index.knn(Vec3d::Zero(), 10).size() == 3);
    CHECK(SpatialIndex().knn(Vec3d::Zero(), 3).empty());
  }

  TEST_CASE("matches an exhaustive scan") {
    Rng rng = make_rng(5, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix3Xd pts(3, 1000);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = Vec3d(u(rng), u(rng), u(rng));
    // Duplicated coordinates exercise the tie-break inside the tree.
    pts.col(500) = pts.col(10);
    pts.col(900) = pts.col(10);
    const SpatialIndex index(pts, 4);
    for (int q = 0; q < 200; ++q) {
      const Vec3d query = q == 0 ? Vec3d(pts.col(10)) : Vec3d(u(rng), u(rng), u(rng));
      CHECK(index.knn(query, 8) == brute_force(pts, query, 8));
    }
  }

  TEST_CASE("radius query returns every point inside, sorted") {
    Rng rng = make_rng(6, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix3Xd pts(3, 500);
    for (Eigen::Index i = 0; i < pts.cols(); ++i) pts.col(i) = Vec3d(u(rng), u(rng), u(rng));
    const SpatialIndex index(pts);
    const Vec3d q(0.1, -0.2, 0.3);
    const auto got = index.radius(q, 0.4);
    std::vector<Neighbor> want;
    for (const auto& n : brute_force(pts, q, pts.cols())) {
      if (n.squared_distance <= 0.16) want.push_back(n);
    }
    CHECK(got == want);
  }
}
