#include "lensdff/demo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "lensdff/binary_io.hpp"
#include "lensdff/feature_io.hpp"

namespace lensdff {

using nlohmann::json;

namespace {

constexpr std::string_view kBundleMagic = "LDB1";

float f32(double v) { return static_cast<float>(v); }

Grasp quantize(const Grasp& g) {
  GraspVector v = g.to_vector();
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(f32(v[i]));
  return Grasp::from_vector(v);
}

GraspFeature compute_cache(const DemoRecord& r, const HandModel& hand, const GraspFeatureParams& params) {
  return grasp_feature(r.cloud, forward_kinematics(hand, r.g_gt.palm(), r.g_gt.joints), params);
}

json manifest(const DemoBundle& b) {
  json records = json::array();
  for (const auto& r : b.records) {
    records.push_back({{"id", r.id},
                       {"prompt", r.prompt_text},
                       {"primitive", to_string(r.primitive)},
                       {"points", r.cloud.size()},
                       {"feature_dim", r.cloud.dim()}});
  }
  return {{"format", "lensdff.demo"},
          {"version", b.format_version},
          {"hand", {{"name", b.hand_name}, {"fingerprint", b.hand_fingerprint}}},
          {"grasp_feature", {{"k", b.feature_params.k}, {"eps", b.feature_params.eps}}},
          {"records", records}};
}

}  // namespace

DemoRecord make_demo_record(std::string id, std::string prompt_text, GraspPrimitive primitive, const Grasp& g_gt,
                            const DistilledCloud& cloud, const HandModel& hand, const GraspFeatureParams& params) {
  DemoRecord r;
  r.id = std::move(id);
  r.prompt_text = std::move(prompt_text);
  r.primitive = primitive;
  r.g_gt = quantize(g_gt);
  r.cloud = quantize(cloud);
  r.cached_grasp_feature = compute_cache(r, hand, params);
  return r;
}

DemoBundle make_bundle(const HandModel& hand, std::vector<DemoRecord> records, const GraspFeatureParams& params) {
  DemoBundle b;
  b.hand_name = hand.name;
  b.hand_fingerprint = hand_fingerprint(hand);
  b.feature_params = params;
  b.records = std::move(records);
  b.validate(hand);
  return b;
}

void DemoBundle::validate(const HandModel& hand, double tol) const {
  if (hand_fingerprint != lensdff::hand_fingerprint(hand)) {
    throw Error(ErrorCode::CacheMismatch, "bundle was built for hand '" + hand_name + "' (" + hand_fingerprint +
                                              "), not the supplied hand");
  }
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw Error(ErrorCode::MalformedFile, "duplicate demo id '" + r.id + "'");
    if (r.cloud.dim() != records.front().cloud.dim()) {
      throw Error(ErrorCode::DimensionMismatch, "demo '" + r.id + "' has a different feature dimension");
    }
    const GraspFeature fresh = compute_cache(r, hand, feature_params);
    if (fresh.blocks.rows() != r.cached_grasp_feature.blocks.rows() ||
        fresh.blocks.cols() != r.cached_grasp_feature.blocks.cols()) {
      throw Error(ErrorCode::CacheMismatch, "demo '" + r.id + "' cached grasp feature has the wrong shape");
    }
    const double err = (fresh.blocks - r.cached_grasp_feature.blocks).cwiseAbs().maxCoeff();
    if (!(err <= tol)) {
      throw Error(ErrorCode::CacheMismatch,
                  "demo '" + r.id + "' cached grasp feature differs from recomputation by " + std::to_string(err));
    }
  }
}

std::string encode_bundle(const DemoBundle& bundle) {
  io::Writer w;
  w.bytes(kBundleMagic);
  w.u32(bundle.format_version);
  const std::string m = manifest(bundle).dump();
  w.u64(m.size());
  w.bytes(m);
  for (const auto& r : bundle.records) {
    const std::string ldc = encode_distilled_cloud(r.cloud);
    w.u64(ldc.size());
    w.bytes(ldc);
    const GraspVector g = r.g_gt.to_vector();
    for (Eigen::Index i = 0; i < g.size(); ++i) w.f32(f32(g[i]));
    const auto& c = r.cached_grasp_feature.blocks;
    w.u32(static_cast<std::uint32_t>(c.cols()));
    w.u32(static_cast<std::uint32_t>(c.rows()));
    for (Eigen::Index i = 0; i < c.size(); ++i) w.f64(c.data()[i]);
  }
  return w.take();
}

DemoBundle decode_bundle(std::string_view bytes, const HandModel& hand) {
  io::Reader in(bytes, "demo bundle");
  if (in.bytes(4) != kBundleMagic) in.fail("bad magic bytes");
  DemoBundle b;
  b.format_version = in.u32();
  if (b.format_version != DemoBundle::kFormatVersion) {
    in.fail("unsupported format version " + std::to_string(b.format_version) + " (expected " +
            std::to_string(DemoBundle::kFormatVersion) + ")");
  }
  const std::uint64_t mlen = in.u64();
  in.need(mlen);
  json m;
  try {
    m = json::parse(in.bytes(mlen));
    if (m.at("format") != "lensdff.demo" || m.at("version") != b.format_version) in.fail("manifest header mismatch");
    b.hand_name = m.at("hand").at("name").get<std::string>();
    b.hand_fingerprint = m.at("hand").at("fingerprint").get<std::string>();
    b.feature_params.k = m.at("grasp_feature").at("k").get<int>();
    b.feature_params.eps = m.at("grasp_feature").at("eps").get<double>();
    for (const auto& jr : m.at("records")) {
      DemoRecord r;
      r.id = jr.at("id").get<std::string>();
      r.prompt_text = jr.at("prompt").get<std::string>();
      const auto p = parse_primitive(jr.at("primitive").get<std::string>());
      if (!p) in.fail("unknown primitive in manifest");
      r.primitive = *p;
      b.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    in.fail(std::string("bad manifest: ") + e.what());
  }

  std::size_t i = 0;
  for (auto& r : b.records) {
    const std::uint64_t len = in.u64();
    in.need(len);
    r.cloud = decode_distilled_cloud(in.bytes(len));
    const auto& jr = m["records"][i++];
    if (jr["points"].get<Eigen::Index>() != r.cloud.size() || jr["feature_dim"].get<Eigen::Index>() != r.cloud.dim()) {
      in.fail("record '" + r.id + "' disagrees with its manifest entry");
    }
    GraspVector g;
    for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = in.f32();
    r.g_gt = Grasp::from_vector(g);
    const std::uint32_t n = in.u32();
    const std::uint32_t d = in.u32();
    in.need(std::size_t{n} * d * 8);
    Eigen::MatrixXd cache(d, n);
    for (Eigen::Index k = 0; k < cache.size(); ++k) cache.data()[k] = in.f64();
    r.cached_grasp_feature.blocks = std::move(cache);
  }
  in.expect_end();
  b.validate(hand);
  return b;
}

void save_bundle(const DemoBundle& bundle, const std::string& path) { io::write_file(path, encode_bundle(bundle)); }

DemoBundle load_bundle(const std::string& path, const HandModel& hand) {
  return decode_bundle(io::read_file(path), hand);
}

std::string_view to_string(RetrievalReduce r) { return r == RetrievalReduce::Mean ? "mean" : "max"; }

RetrievalReduce parse_retrieval_reduce(std::string_view name) {
  if (name == "mean") return RetrievalReduce::Mean;
  if (name == "max") return RetrievalReduce::Max;
  throw Error(ErrorCode::InvalidConfig, "retrieval_reduce must be 'mean' or 'max', got '" + std::string(name) + "'");
}

std::size_t retrieve_index(const DemoBundle& bundle, const LanguageFeature& f_lan_test, GraspPrimitive primitive,
                           RetrievalReduce reduce) {
  std::size_t best = bundle.records.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bundle.records.size(); ++i) {
    const DemoRecord& r = bundle.records[i];
    if (r.primitive != primitive) continue;
    const GraspFeature& g = r.cached_grasp_feature;
    double score = cosine_similarity(reduce == RetrievalReduce::Mean ? g.mean_block() : g.max_block(),
                                     f_lan_test.feature);
    if (std::isnan(score)) score = -std::numeric_limits<double>::infinity();
    const bool better = best == bundle.records.size() || score > best_score ||
                        (score == best_score && r.id < bundle.records[best].id);
    if (better) {
      best = i;
      best_score = score;
    }
  }
  if (best == bundle.records.size()) {
    throw Error(ErrorCode::NoDemoForPrimitive, "no demo in the bundle uses primitive '" +
                                                   std::string(to_string(primitive)) + "'");
  }
  return best;
}

const DemoRecord& retrieve(const DemoBundle& bundle, const LanguageFeature& f_lan_test, GraspPrimitive primitive,
                           RetrievalReduce reduce) {
  return bundle.records[retrieve_index(bundle, f_lan_test, primitive, reduce)];
}

}  // namespace lensdff
