#include <cstring>
#include <filesystem>

#include "lensdff/binary_io.hpp"
#include "lensdff/feature_io.hpp"
#include "lensdff/random.hpp"
#include "support.hpp"

using namespace lensdff;

namespace {

ViewFeatureCloud sample_view(int n, int dim, bool normals) {
  Rng rng = make_rng(21, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> g(0.0, 1.0);
  ViewFeatureCloud v;
  v.cloud.points = Eigen::Matrix3Xd::NullaryExpr(3, n, [&] { return g(rng); });
  v.features = Eigen::MatrixXd::NullaryExpr(dim, n, [&] { return g(rng); });
  if (normals) v.cloud.normals = Eigen::Matrix3Xd::NullaryExpr(3, n, [&] { return g(rng); });
  v.cloud.view_id = 3;
  v.camera_pose.rotation = Eigen::AngleAxisd(0.4, Vec3d(1, 2, 3).normalized()).toRotationMatrix();
  v.camera_pose.translation = Vec3d(0.5, -0.25, 1.0);
  return quantize(v);
}

void set_u32(std::string& bytes, std::size_t offset, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[offset + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lensdff_io_" + name);
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("little-endian primitives") {
    io::Writer w;
    w.u32(0x01020304u);
    w.f32(1.0f);
    w.u8(7);
    const std::string b = w.take();
    REQUIRE(b.size() == 9);
    CHECK(b.substr(0, 4) == std::string("\x04\x03\x02\x01", 4));
    io::Reader r(b);
    CHECK(r.u32() == 0x01020304u);
    CHECK(r.f32() == 1.0f);
    CHECK(r.u8() == 7);
    CHECK(r.at_end());
    CHECK_ERROR_CODE(r.u8(), ErrorCode::MalformedFile);
  }

  TEST_CASE("feature cloud round trip is bit-identical") {
    for (bool normals : {false, true}) {
      const ViewFeatureCloud v = sample_view(17, 5, normals);
      const std::string bytes = encode_feature_cloud(v);
      const ViewFeatureCloud back = decode_feature_cloud(bytes);
      CHECK(back.cloud.points == v.cloud.points);
      CHECK(back.features == v.features);
      CHECK(back.cloud.has_normals() == normals);
      if (normals) CHECK(*back.cloud.normals == *v.cloud.normals);
      CHECK(back.cloud.view_id == v.cloud.view_id);
      CHECK(back.camera_pose.rotation == v.camera_pose.rotation);
      CHECK(back.camera_pose.translation == v.camera_pose.translation);
      CHECK(encode_feature_cloud(back) == bytes);
    }
  }

  TEST_CASE("feature cloud file round trip") {
    const ViewFeatureCloud v = sample_view(9, 3, true);
    const auto path = temp_file("view.lfc").string();
    save_feature_cloud(v, path);
    CHECK(encode_feature_cloud(load_feature_cloud(path)) == encode_feature_cloud(v));
    std::filesystem::remove(path);
    CHECK_ERROR_CODE(load_feature_cloud(path), ErrorCode::IoError);
  }

  TEST_CASE("missing view id survives") {
    ViewFeatureCloud v = sample_view(4, 2, false);
    v.cloud.view_id.reset();
    CHECK_FALSE(decode_feature_cloud(encode_feature_cloud(v)).cloud.view_id.has_value());
  }

  TEST_CASE("wrong magic") {
    std::string bytes = encode_feature_cloud(sample_view(4, 2, false));
    bytes[3] = '9';
    CHECK_ERROR_CODE(decode_feature_cloud(bytes), ErrorCode::MalformedFile);
    CHECK_ERROR_CODE(decode_feature_cloud(""), ErrorCode::MalformedFile);
    CHECK_ERROR_CODE(decode_distilled_cloud(encode_feature_cloud(sample_view(4, 2, false))),
                     ErrorCode::MalformedFile);
  }

  TEST_CASE("declared count larger than the payload") {
    std::string bytes = encode_feature_cloud(sample_view(9, 4, false));
    set_u32(bytes, 4, 10);
    CHECK_ERROR_CODE(decode_feature_cloud(bytes), ErrorCode::MalformedFile);
  }

  TEST_CASE("truncated or padded files") {
    const std::string bytes = encode_feature_cloud(sample_view(10, 4, true));
    CHECK_ERROR_CODE(decode_feature_cloud(bytes.substr(0, bytes.size() - 1)), ErrorCode::MalformedFile);
    CHECK_ERROR_CODE(decode_feature_cloud(bytes + "x"), ErrorCode::MalformedFile);
  }

  TEST_CASE("distilled cloud round trip") {
    const ViewFeatureCloud v = sample_view(12, 6, true);
    DistilledCloud d;
    d.points = v.cloud.points;
    d.features = v.features;
    d.normals = *v.cloud.normals;
    d.language = {FeatureVec::LinSpaced(6, -1.0, 1.5), LanguageSource::Fused};
    d = quantize(d);
    const std::string bytes = encode_distilled_cloud(d);
    const DistilledCloud back = decode_distilled_cloud(bytes);
    CHECK(back.points == d.points);
    CHECK(back.features == d.features);
    CHECK(back.normals == d.normals);
    CHECK(back.language.feature == d.language.feature);
    CHECK(back.language.source == LanguageSource::Fused);
    CHECK(encode_distilled_cloud(back) == bytes);
  }
}
