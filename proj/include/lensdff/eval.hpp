#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lensdff/demo.hpp"
#include "lensdff/features.hpp"
#include "lensdff/hand.hpp"
#include "lensdff/optimizer.hpp"
#include "lensdff/sampler.hpp"
#include "lensdff/surface_query.hpp"
#include "lensdff/synthetic.hpp"

namespace lensdff {

struct EvalConfig {
  double contact_delta = 0.005;      // m
  double penetration_margin = 0.01;  // m
  double close_step = 0.02;          // rad per finger-closing step

  void validate() const;
};

struct StabilityReport {
  int contact_count = 0;                     // distinct fingers with a fingertip within contact_delta
  double min_clearance = 0.0;                // smallest signed distance over all hand points
  bool success = false;
  std::array<bool, kFingerCount> finger_contact{};
  int penetrating_palm_points = 0;
  double min_palm_clearance = 0.0;
};

/// Geometric grasp proxy. Fingertip points are the distal-link surface points.
/// success = contacts on at least 3 fingers and no palm point deeper than
/// penetration_margin below the surface.
StabilityReport contact_check(const Grasp& grasp, const HandModel& hand, const PointCloud& object_cloud,
                              double contact_delta = 0.005, double penetration_margin = 0.01);
StabilityReport contact_check(const Grasp& grasp, const HandModel& hand, const SurfaceQuery& object,
                              double contact_delta = 0.005, double penetration_margin = 0.01);

/// Closes every finger along its active flexion joints, proximal first, in
/// close_step increments until the finger touches the object or hits its limit.
Grasp close_fingers(const Grasp& grasp, const HandModel& hand, const EigengraspMap& map, const SurfaceQuery& object,
                    const EvalConfig& cfg = {});

enum class AlignmentMode { None, Enhance, EnhanceGate };
inline constexpr std::array<AlignmentMode, 3> kAlignmentModes = {AlignmentMode::None, AlignmentMode::Enhance,
                                                                  AlignmentMode::EnhanceGate};
std::string_view to_string(AlignmentMode m);

/// Demo and test view representations; multi-view demo with a single test
/// view is the default pipeline.
enum class Representation { SingleSingle, MultiMulti, MultiSingle, SingleMulti };
inline constexpr std::array<Representation, 4> kRepresentations = {
    Representation::SingleSingle, Representation::MultiMulti, Representation::MultiSingle,
    Representation::SingleMulti};
std::string_view to_string(Representation r);

struct BenchmarkConfig {
  std::uint64_t seed = 2024;
  int scenes = 10;
  int objects_per_scene = 3;
  double view_noise = 0.5;
  int demo_views = 4;
  int multi_test_views = 4;
  bool representation_rows = true;
  SyntheticConfig synthetic;
  DistillOptions distill;
  double tau = kDefaultGateThreshold;
  RetrievalReduce retrieval_reduce = RetrievalReduce::Mean;
  SamplerConfig sampler;
  OptimConfig optimizer;
  EvalConfig eval;
  int threads = 0;

  void validate() const;
};

struct AblationRow {
  std::string section;  // "alignment" or "representation"
  std::string mode;
  int grasp_count = 0;    // seeds attempted
  int failed_count = 0;   // seeds whose optimization failed
  int success_count = 0;
  double success_rate = 0.0;        // success_count / grasp_count
  double mean_final_e_feat = 0.0;   // over non-failed grasps
};

struct AblationCell {
  int scene = 0;
  std::string object;
  std::string section;
  std::string mode;
  std::string demo_id;
  std::string language_source;  // raw, test, demo or fused
  int grasps = 0;
  int failed = 0;
  int successes = 0;
  double mean_e_feat = 0.0;
  std::string error;  // non-empty when the whole cell failed
};

struct AblationReport {
  static constexpr int kSchemaVersion = 1;
  std::uint64_t seed = 0;
  std::vector<AblationRow> alignment;
  std::vector<AblationRow> representation;
  std::vector<AblationCell> cells;

  const AblationRow& row(std::string_view section, std::string_view mode) const;
};

/// Demo bundles built from the world's demonstration objects.
struct BenchmarkDemos {
  DemoBundle raw_multi;       // raw multi-view merge
  DemoBundle enhanced_multi;  // language-enhanced multi-view
  DemoBundle enhanced_single; // one record per enhanced demo view
};

BenchmarkDemos make_benchmark_demos(const SyntheticWorld& world, const HandModel& hand, const BenchmarkConfig& cfg);

/// Runs distill, retrieve, sample, optimize and contact_check for every scene
/// object and mode. Sampler seeds depend only on (cfg.seed, object), so all
/// alignment modes start from identical seeds.
AblationReport run_ablation(const SyntheticWorld& world, const std::vector<SyntheticScene>& scenes,
                            const HandModel& hand, const BenchmarkConfig& cfg);

/// World and scenes from cfg, then run_ablation.
AblationReport run_benchmark(const BenchmarkConfig& cfg, const HandModel& hand);

enum class ReportFormat { Json, Csv };

/// CSV columns: section,mode,grasp_count,failed_count,success_count,success_rate,mean_final_e_feat
inline constexpr std::array<std::string_view, 7> kReportCsvColumns = {
    "section", "mode", "grasp_count", "failed_count", "success_count", "success_rate", "mean_final_e_feat"};

std::string report_to_json(const AblationReport& report);
AblationReport report_from_json(std::string_view text);
std::string report_to_csv(const AblationReport& report);
void emit_report(const AblationReport& report, const std::string& path, ReportFormat format);

}  // namespace lensdff
