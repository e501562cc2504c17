#pragma once

#include <string>
#include <string_view>

#include "lensdff/features.hpp"

namespace lensdff {

// Feature-cloud (.lfc) layout, all little-endian:
//   "LFC1" | u32 point_count | u32 feature_dim | u32 view_id | f32 camera_pose[12] (row-major 3x4)
//   | point_count x f32[3] xyz | point_count x f32[feature_dim] | u8 has_normals
//   | (has_normals ? point_count x f32[3] : nothing)
// view_id 0xFFFFFFFF encodes "no view".
//
// Distilled-cloud (.ldc) uses magic "LDC1", the same layout (normals always
// present, view_id unset, identity camera), then f32 language[feature_dim] and
// a u8 source tag (0 demo, 1 test, 2 fused).

inline constexpr std::uint32_t kNoViewId = 0xFFFFFFFFu;

std::string encode_feature_cloud(const ViewFeatureCloud& view);
ViewFeatureCloud decode_feature_cloud(std::string_view bytes);
void save_feature_cloud(const ViewFeatureCloud& view, const std::string& path);
ViewFeatureCloud load_feature_cloud(const std::string& path);

std::string encode_distilled_cloud(const DistilledCloud& cloud);
DistilledCloud decode_distilled_cloud(std::string_view bytes);
void save_distilled_cloud(const DistilledCloud& cloud, const std::string& path);
DistilledCloud load_distilled_cloud(const std::string& path);

/// Rounds every stored quantity to f32 so in-memory values match a save/load cycle.
ViewFeatureCloud quantize(const ViewFeatureCloud& view);
DistilledCloud quantize(const DistilledCloud& cloud);

}  // namespace lensdff
