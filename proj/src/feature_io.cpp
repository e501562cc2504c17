#include "lensdff/feature_io.hpp"

#include "lensdff/binary_io.hpp"

namespace lensdff {

namespace {

constexpr std::string_view kLfcMagic = "LFC1";
constexpr std::string_view kLdcMagic = "LDC1";

double q(double v) { return static_cast<double>(static_cast<float>(v)); }

template <typename Derived>
void write_matrix(io::Writer& w, const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) w.f32(static_cast<float>(m(r, c)));
}

template <typename Matrix>
void read_matrix(io::Reader& r, Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  r.need(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4);
  m.resize(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, c) = r.f32();
}

struct Header {
  std::uint32_t count = 0;
  std::uint32_t dim = 0;
  std::uint32_t view_id = kNoViewId;
  Posed camera;
};

void write_header(io::Writer& w, std::string_view magic, const Header& h) {
  w.bytes(magic);
  w.u32(h.count);
  w.u32(h.dim);
  w.u32(h.view_id);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) w.f32(static_cast<float>(h.camera.rotation(r, c)));
    w.f32(static_cast<float>(h.camera.translation[r]));
  }
}

Header read_header(io::Reader& r, std::string_view magic) {
  if (r.remaining() < 4 || r.bytes(4) != magic) r.fail("bad magic, expected " + std::string(magic));
  Header h;
  h.count = r.u32();
  h.dim = r.u32();
  h.view_id = r.u32();
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 3; ++c) h.camera.rotation(row, c) = r.f32();
    h.camera.translation[row] = r.f32();
  }
  return h;
}

std::uint32_t checked_u32(Eigen::Index v, const char* what) {
  if (v < 0 || v > static_cast<Eigen::Index>(0xFFFFFFFEu)) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " does not fit the file format");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_feature_cloud(const ViewFeatureCloud& view) {
  view.validate();
  io::Writer w;
  write_header(w, kLfcMagic,
               {checked_u32(view.size(), "point count"), checked_u32(view.dim(), "feature dim"),
                view.cloud.view_id.value_or(kNoViewId), view.camera_pose});
  write_matrix(w, view.cloud.points);
  write_matrix(w, view.features);
  w.u8(view.cloud.normals ? 1 : 0);
  if (view.cloud.normals) write_matrix(w, *view.cloud.normals);
  return w.take();
}

ViewFeatureCloud decode_feature_cloud(std::string_view bytes) {
  io::Reader r(bytes, "feature cloud");
  const Header h = read_header(r, kLfcMagic);
  ViewFeatureCloud v;
  v.camera_pose = h.camera;
  if (h.view_id != kNoViewId) v.cloud.view_id = h.view_id;
  read_matrix(r, v.cloud.points, 3, h.count);
  read_matrix(r, v.features, h.dim, h.count);
  const std::uint8_t flag = r.u8();
  if (flag > 1) r.fail("invalid normals flag");
  if (flag == 1) {
    Eigen::Matrix3Xd n;
    read_matrix(r, n, 3, h.count);
    v.cloud.normals = std::move(n);
  }
  r.expect_end();
  return v;
}

void save_feature_cloud(const ViewFeatureCloud& view, const std::string& path) {
  io::write_file(path, encode_feature_cloud(view));
}

ViewFeatureCloud load_feature_cloud(const std::string& path) {
  return decode_feature_cloud(io::read_file(path));
}

std::string encode_distilled_cloud(const DistilledCloud& cloud) {
  if (cloud.features.cols() != cloud.size() || cloud.normals.cols() != cloud.size()) {
    throw Error(ErrorCode::DimensionMismatch, "distilled cloud arrays disagree in length");
  }
  if (cloud.language.dim() != cloud.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "language feature dimension differs from cloud");
  }
  io::Writer w;
  write_header(w, kLdcMagic,
               {checked_u32(cloud.size(), "point count"), checked_u32(cloud.dim(), "feature dim"),
                kNoViewId, Posed::identity()});
  write_matrix(w, cloud.points);
  write_matrix(w, cloud.features);
  w.u8(1);
  write_matrix(w, cloud.normals);
  write_matrix(w, cloud.language.feature);
  w.u8(static_cast<std::uint8_t>(cloud.language.source));
  return w.take();
}

DistilledCloud decode_distilled_cloud(std::string_view bytes) {
  io::Reader r(bytes, "distilled cloud");
  const Header h = read_header(r, kLdcMagic);
  DistilledCloud c;
  read_matrix(r, c.points, 3, h.count);
  read_matrix(r, c.features, h.dim, h.count);
  if (r.u8() != 1) r.fail("distilled cloud must carry normals");
  read_matrix(r, c.normals, 3, h.count);
  read_matrix(r, c.language.feature, h.dim, 1);
  const std::uint8_t tag = r.u8();
  if (tag > 2) r.fail("invalid language source tag");
  c.language.source = static_cast<LanguageSource>(tag);
  r.expect_end();
  return c;
}

void save_distilled_cloud(const DistilledCloud& cloud, const std::string& path) {
  io::write_file(path, encode_distilled_cloud(cloud));
}

DistilledCloud load_distilled_cloud(const std::string& path) {
  return decode_distilled_cloud(io::read_file(path));
}

ViewFeatureCloud quantize(const ViewFeatureCloud& view) {
  ViewFeatureCloud out = view;
  out.cloud.points = out.cloud.points.unaryExpr(&q);
  out.features = out.features.unaryExpr(&q);
  if (out.cloud.normals) *out.cloud.normals = out.cloud.normals->unaryExpr(&q);
  out.camera_pose.rotation = out.camera_pose.rotation.unaryExpr(&q);
  out.camera_pose.translation = out.camera_pose.translation.unaryExpr(&q);
  return out;
}

DistilledCloud quantize(const DistilledCloud& cloud) {
  DistilledCloud out = cloud;
  out.points = out.points.unaryExpr(&q);
  out.features = out.features.unaryExpr(&q);
  out.normals = out.normals.unaryExpr(&q);
  out.language.feature = out.language.feature.unaryExpr(&q);
  return out;
}

}  // namespace lensdff
