#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lensdff/features.hpp"
#include "lensdff/hand.hpp"

namespace lensdff {

struct DemoRecord {
  std::string id;
  std::string prompt_text;
  GraspPrimitive primitive = GraspPrimitive::Cylindrical;
  Grasp g_gt;
  DistilledCloud cloud;                // cloud.language is the demo prompt feature
  GraspFeature cached_grasp_feature;   // grasp_feature(cloud, FK(hand, g_gt))

  const LanguageFeature& language() const { return cloud.language; }
};

struct DemoBundle {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::string hand_name;
  std::string hand_fingerprint;
  GraspFeatureParams feature_params;
  std::vector<DemoRecord> records;

  /// Unique ids, one feature dimension, caches matching recomputation within `tol`.
  void validate(const HandModel& hand, double tol = 1e-6) const;
};

/// Builds a record whose cloud and grasp are already rounded to their stored
/// precision, so the cache survives a save/load cycle unchanged.
DemoRecord make_demo_record(std::string id, std::string prompt_text, GraspPrimitive primitive, const Grasp& g_gt,
                            const DistilledCloud& cloud, const HandModel& hand,
                            const GraspFeatureParams& params = {});

DemoBundle make_bundle(const HandModel& hand, std::vector<DemoRecord> records, const GraspFeatureParams& params = {});

// Bundle file (.demo), little-endian:
//   "LDB1" | u32 version | u64 manifest_len | manifest JSON
//   | per record: u64 ldc_len | .ldc bytes | f32 grasp[24] | u32 N | u32 D | f64 cache[N*D] (column-major)
// The grasp vector is [15 joints, rot6d, translation] in the hand module's joint order.
std::string encode_bundle(const DemoBundle& bundle);
DemoBundle decode_bundle(std::string_view bytes, const HandModel& hand);
void save_bundle(const DemoBundle& bundle, const std::string& path);
/// Throws MalformedFile, or CacheMismatch when a stored grasp feature disagrees
/// with recomputation beyond 1e-6 or the bundle was built for another hand.
DemoBundle load_bundle(const std::string& path, const HandModel& hand);

enum class RetrievalReduce { Mean, Max };

std::string_view to_string(RetrievalReduce r);
RetrievalReduce parse_retrieval_reduce(std::string_view name);

/// Index of the record of `primitive` whose reduced cached grasp feature has the
/// highest cosine with `f_lan_test`; ties go to the smallest id.
std::size_t retrieve_index(const DemoBundle& bundle, const LanguageFeature& f_lan_test, GraspPrimitive primitive,
                           RetrievalReduce reduce = RetrievalReduce::Mean);

const DemoRecord& retrieve(const DemoBundle& bundle, const LanguageFeature& f_lan_test, GraspPrimitive primitive,
                           RetrievalReduce reduce = RetrievalReduce::Mean);

}  // namespace lensdff
