#include "lensdff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "lensdff/binary_io.hpp"
#include "lensdff/parallel.hpp"
#include "lensdff/random.hpp"

namespace lensdff {

using nlohmann::json;

void EvalConfig::validate() const {
  if (!(contact_delta > 0.0)) throw Error(ErrorCode::InvalidConfig, "eval.contact_delta must be positive");
  if (!(penetration_margin >= 0.0)) throw Error(ErrorCode::InvalidConfig, "eval.penetration_margin must be >= 0");
  if (!(close_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "eval.close_step must be positive");
}

StabilityReport contact_check(const Grasp& grasp, const HandModel& hand, const SurfaceQuery& object,
                              double contact_delta, double penetration_margin) {
  const Eigen::Matrix3Xd pts = forward_kinematics(hand, grasp.palm(), grasp.joints);
  StabilityReport rep;
  rep.min_clearance = std::numeric_limits<double>::infinity();
  rep.min_palm_clearance = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const SurfacePoint& sp = hand.surface[static_cast<std::size_t>(i)];
    const SurfaceDistance d = object.query(pts.col(i));
    rep.min_clearance = std::min(rep.min_clearance, d.signed_distance);
    if (sp.link == Link::Palm) {
      rep.min_palm_clearance = std::min(rep.min_palm_clearance, d.signed_distance);
      if (d.signed_distance < -penetration_margin) ++rep.penetrating_palm_points;
    } else if (sp.link == Link::Distal && d.distance <= contact_delta) {
      rep.finger_contact[static_cast<std::size_t>(sp.finger)] = true;
    }
  }
  rep.contact_count = static_cast<int>(std::count(rep.finger_contact.begin(), rep.finger_contact.end(), true));
  rep.success = rep.contact_count >= 3 && rep.penetrating_palm_points == 0;
  return rep;
}

StabilityReport contact_check(const Grasp& grasp, const HandModel& hand, const PointCloud& object_cloud,
                              double contact_delta, double penetration_margin) {
  return contact_check(grasp, hand, SurfaceQuery(object_cloud), contact_delta, penetration_margin);
}

Grasp close_fingers(const Grasp& grasp, const HandModel& hand, const EigengraspMap& map, const SurfaceQuery& object,
                    const EvalConfig& cfg) {
  Grasp g = grasp;
  const Posed palm = g.palm();
  // Surface point indices per finger, split by link.
  std::array<std::vector<Eigen::Index>, kFingerCount> finger_points;
  for (std::size_t i = 0; i < hand.surface.size(); ++i) {
    if (hand.surface[i].finger >= 0) {
      finger_points[static_cast<std::size_t>(hand.surface[i].finger)].push_back(static_cast<Eigen::Index>(i));
    }
  }
  const auto touching = [&](int finger, bool distal_only) {
    const Eigen::Matrix3Xd pts = forward_kinematics(hand, palm, g.joints);
    for (Eigen::Index i : finger_points[static_cast<std::size_t>(finger)]) {
      if (distal_only && hand.surface[static_cast<std::size_t>(i)].link != Link::Distal) continue;
      const SurfaceDistance d = object.query(pts.col(i));
      if (d.distance <= cfg.contact_delta || d.signed_distance < 0.0) return true;
    }
    return false;
  };
  for (int f = 0; f < kFingerCount; ++f) {
    for (JointRole role : {JointRole::ProximalFlexion, JointRole::DistalFlexion}) {
      const int j = joint_index(Finger(f), role);
      if (!map.active[static_cast<std::size_t>(j)]) continue;
      const bool distal_only = role == JointRole::DistalFlexion;
      while (g.joints[j] < hand.limits.upper[j] && !touching(f, distal_only)) {
        g.joints[j] = std::min(hand.limits.upper[j], g.joints[j] + cfg.close_step);
      }
    }
  }
  return g;
}

std::string_view to_string(AlignmentMode m) {
  switch (m) {
    case AlignmentMode::None: return "none";
    case AlignmentMode::Enhance: return "enhance";
    case AlignmentMode::EnhanceGate: return "enhance+gate";
  }
  return "unknown";
}

std::string_view to_string(Representation r) {
  switch (r) {
    case Representation::SingleSingle: return "single-demo/single-test";
    case Representation::MultiMulti: return "multi-demo/multi-test";
    case Representation::MultiSingle: return "multi-demo/single-test";
    case Representation::SingleMulti: return "single-demo/multi-test";
  }
  return "unknown";
}

void BenchmarkConfig::validate() const {
  const auto fail = [](const char* m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (scenes < 1) fail("benchmark.scenes must be >= 1");
  if (objects_per_scene < 1) fail("benchmark.objects_per_scene must be >= 1");
  if (!(view_noise >= 0.0)) fail("benchmark.view_noise must be >= 0");
  if (demo_views < 1 || multi_test_views < 1) fail("view counts must be >= 1");
  if (!(tau >= -1.0 && tau <= 1.0)) fail("tau must lie in [-1, 1]");
  synthetic.validate();
  sampler.validate();
  optimizer.validate();
  eval.validate();
}

const AblationRow& AblationReport::row(std::string_view section, std::string_view mode) const {
  const auto& rows = section == "alignment" ? alignment : representation;
  for (const auto& r : rows) {
    if (r.mode == mode) return r;
  }
  throw Error(ErrorCode::InvalidConfig, "report has no row " + std::string(section) + "/" + std::string(mode));
}

namespace {

constexpr double kDemoAzimuth = 0.3;

std::vector<ViewFeatureCloud> demo_views(const SyntheticWorld& world, const SceneObject& demo, int c,
                                         const BenchmarkConfig& cfg) {
  return orbit_views(demo, cfg.demo_views, kDemoAzimuth, derive_seed(world.seed, 500 + static_cast<std::uint64_t>(c)),
                     cfg.view_noise, cfg.synthetic.noise_correlation, cfg.synthetic.noise_length);
}

GraspFeatureParams feature_params(const OptimConfig& cfg) { return {cfg.knn_k, cfg.eps}; }

enum class CellKind { None, Enhance, Gate, SingleSingle, MultiMulti, SingleMulti };

struct CellTask {
  int scene = 0;
  int object = 0;
  int global_object = 0;
  CellKind kind = CellKind::None;
};

std::pair<std::string, std::string> row_of(CellKind k) {
  switch (k) {
    case CellKind::None: return {"alignment", std::string(to_string(AlignmentMode::None))};
    case CellKind::Enhance: return {"alignment", std::string(to_string(AlignmentMode::Enhance))};
    case CellKind::Gate: return {"alignment", std::string(to_string(AlignmentMode::EnhanceGate))};
    case CellKind::SingleSingle: return {"representation", std::string(to_string(Representation::SingleSingle))};
    case CellKind::MultiMulti: return {"representation", std::string(to_string(Representation::MultiMulti))};
    case CellKind::SingleMulti: return {"representation", std::string(to_string(Representation::SingleMulti))};
  }
  return {};
}

AblationCell run_cell(const CellTask& task, const SceneObject& object, const BenchmarkDemos& demos,
                      const HandModel& hand, const BenchmarkConfig& cfg) {
  AblationCell cell;
  cell.scene = task.scene;
  cell.object = object.name;
  std::tie(cell.section, cell.mode) = row_of(task.kind);
  const int n_seeds = cfg.optimizer.n_seeds;
  cell.grasps = n_seeds;
  try {
    const bool multi_test = task.kind == CellKind::MultiMulti || task.kind == CellKind::SingleMulti;
    const bool single_demo = task.kind == CellKind::SingleSingle || task.kind == CellKind::SingleMulti;
    const DemoBundle& bundle = task.kind == CellKind::None ? demos.raw_multi
                               : single_demo               ? demos.enhanced_single
                                                           : demos.enhanced_multi;

    Rng az_rng = make_rng(cfg.seed, 3000 + static_cast<std::uint64_t>(task.global_object));
    const double azimuth = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(az_rng);
    const auto views = orbit_views(object, multi_test ? cfg.multi_test_views : 1, azimuth,
                                   derive_seed(cfg.seed, 4000 + static_cast<std::uint64_t>(task.global_object)),
                                   cfg.view_noise, cfg.synthetic.noise_correlation, cfg.synthetic.noise_length);

    const DemoRecord& demo = retrieve(bundle, object.language, object.primitive, cfg.retrieval_reduce);
    cell.demo_id = demo.id;
    DistilledCloud test;
    switch (task.kind) {
      case CellKind::None:
        test = fuse_views_raw(views, object.language, cfg.distill);
        cell.language_source = "raw";
        break;
      case CellKind::Enhance:
        test = distill_views(views, object.language, cfg.distill);
        cell.language_source = "test";
        break;
      default: {
        const LanguageFeature lang = gate_language(demo.language(), object.language, cfg.tau);
        test = distill_views(views, lang, cfg.distill);
        cell.language_source = std::string(to_string(lang.source));
      }
    }

    SamplerConfig sc = cfg.sampler;
    sc.n_samples = n_seeds;
    sc.seed = derive_seed(cfg.seed, 7000 + static_cast<std::uint64_t>(task.global_object));
    const PointCloud pc = test.as_point_cloud();
    const EigengraspMap& map = hand.eigengrasp(object.primitive);
    const auto seeds = sample_palm_poses(pc, fit_obb(pc), sc, map, hand.limits);

    OptimConfig oc = cfg.optimizer;
    oc.threads = 1;
    const FeatureField field(test);
    const OptimResult result = optimize_batch(seeds, demo.cached_grasp_feature, field, hand, oc);

    const SurfaceQuery surface(object.cloud());
    double e_sum = 0.0;
    for (const auto& s : result.seeds) {
      if (s.failed) {
        ++cell.failed;
        continue;
      }
      e_sum += s.best_energy.e_feat;
      const Grasp closed = close_fingers(s.best_grasp, hand, map, surface, cfg.eval);
      if (contact_check(closed, hand, surface, cfg.eval.contact_delta, cfg.eval.penetration_margin).success) {
        ++cell.successes;
      }
    }
    const int ok = cell.grasps - cell.failed;
    cell.mean_e_feat = ok > 0 ? e_sum / ok : 0.0;
  } catch (const Error& e) {
    cell.error = e.what();
    cell.failed = n_seeds;
    cell.successes = 0;
  }
  return cell;
}

AblationRow aggregate(const std::vector<AblationCell>& cells, const std::string& section, const std::string& mode) {
  AblationRow row;
  row.section = section;
  row.mode = mode;
  double e_sum = 0.0;
  for (const auto& c : cells) {
    if (c.mode != mode) continue;
    row.grasp_count += c.grasps;
    row.failed_count += c.failed;
    row.success_count += c.successes;
    e_sum += c.mean_e_feat * (c.grasps - c.failed);
  }
  const int ok = row.grasp_count - row.failed_count;
  row.success_rate = row.grasp_count > 0 ? static_cast<double>(row.success_count) / row.grasp_count : 0.0;
  row.mean_final_e_feat = ok > 0 ? e_sum / ok : 0.0;
  return row;
}

}  // namespace

BenchmarkDemos make_benchmark_demos(const SyntheticWorld& world, const HandModel& hand, const BenchmarkConfig& cfg) {
  std::vector<DemoRecord> raw, multi, single;
  const GraspFeatureParams params = feature_params(cfg.optimizer);
  for (int c = 0; c < static_cast<int>(world.categories.size()); ++c) {
    const SceneObject demo = make_demo_object(world, c, hand);
    const auto views = demo_views(world, demo, c, cfg);
    const CategorySpec& spec = world.category(c);
    raw.push_back(make_demo_record(spec.name, spec.prompt, spec.primitive, *demo.planted,
                                   fuse_views_raw(views, demo.language, cfg.distill), hand, params));
    multi.push_back(make_demo_record(spec.name, spec.prompt, spec.primitive, *demo.planted,
                                     distill_views(views, demo.language, cfg.distill), hand, params));
    for (std::size_t v = 0; v < views.size(); ++v) {
      single.push_back(make_demo_record(spec.name + "-view" + std::to_string(v), spec.prompt, spec.primitive,
                                        *demo.planted,
                                        distill_views(std::span(&views[v], 1), demo.language, cfg.distill), hand,
                                        params));
    }
  }
  return {make_bundle(hand, std::move(raw), params), make_bundle(hand, std::move(multi), params),
          make_bundle(hand, std::move(single), params)};
}

AblationReport run_ablation(const SyntheticWorld& world, const std::vector<SyntheticScene>& scenes,
                            const HandModel& hand, const BenchmarkConfig& cfg) {
  cfg.validate();
  if (scenes.empty()) throw Error(ErrorCode::EmptyInput, "ablation needs at least one scene");
  const BenchmarkDemos demos = make_benchmark_demos(world, hand, cfg);

  std::vector<CellKind> kinds = {CellKind::None, CellKind::Enhance, CellKind::Gate};
  if (cfg.representation_rows) {
    kinds.insert(kinds.end(), {CellKind::SingleSingle, CellKind::MultiMulti, CellKind::SingleMulti});
  }
  std::vector<CellTask> tasks;
  std::vector<const SceneObject*> objects;
  int global = 0;
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    for (std::size_t j = 0; j < scenes[s].objects.size(); ++j, ++global) {
      for (CellKind k : kinds) {
        tasks.push_back({static_cast<int>(s), static_cast<int>(j), global, k});
        objects.push_back(&scenes[s].objects[j]);
      }
    }
  }
  std::vector<AblationCell> cells(tasks.size());
  parallel_for(tasks.size(), cfg.threads,
               [&](std::size_t i) { cells[i] = run_cell(tasks[i], *objects[i], demos, hand, cfg); });

  AblationReport rep;
  rep.seed = cfg.seed;
  rep.cells = cells;
  for (AlignmentMode m : kAlignmentModes) rep.alignment.push_back(aggregate(cells, "alignment", std::string(to_string(m))));
  if (cfg.representation_rows) {
    for (Representation r : kRepresentations) {
      // The default representation is the enhance+gate alignment cell.
      const std::string source = r == Representation::MultiSingle ? std::string(to_string(AlignmentMode::EnhanceGate))
                                                                  : std::string(to_string(r));
      AblationRow row = aggregate(cells, "representation", source);
      row.section = "representation";
      row.mode = std::string(to_string(r));
      rep.representation.push_back(row);
    }
  }
  return rep;
}

AblationReport run_benchmark(const BenchmarkConfig& cfg, const HandModel& hand) {
  cfg.validate();
  const SyntheticWorld world = make_world(cfg.synthetic, cfg.seed);
  std::vector<SyntheticScene> scenes;
  for (int s = 0; s < cfg.scenes; ++s) scenes.push_back(make_scene(world, s, cfg.objects_per_scene));
  return run_ablation(world, scenes, hand, cfg);
}

namespace {

json row_json(const AblationRow& r) {
  return {{"section", r.section},           {"mode", r.mode},
          {"grasp_count", r.grasp_count},   {"failed_count", r.failed_count},
          {"success_count", r.success_count}, {"success_rate", r.success_rate},
          {"mean_final_e_feat", r.mean_final_e_feat}};
}

AblationRow row_from(const json& j) {
  AblationRow r;
  r.section = j.at("section").get<std::string>();
  r.mode = j.at("mode").get<std::string>();
  r.grasp_count = j.at("grasp_count").get<int>();
  r.failed_count = j.at("failed_count").get<int>();
  r.success_count = j.at("success_count").get<int>();
  r.success_rate = j.at("success_rate").get<double>();
  r.mean_final_e_feat = j.at("mean_final_e_feat").get<double>();
  return r;
}

}  // namespace

std::string report_to_json(const AblationReport& report) {
  json alignment = json::array();
  json representation = json::array();
  json cells = json::array();
  for (const auto& r : report.alignment) alignment.push_back(row_json(r));
  for (const auto& r : report.representation) representation.push_back(row_json(r));
  for (const auto& c : report.cells) {
    cells.push_back({{"scene", c.scene},       {"object", c.object},
                     {"section", c.section},   {"mode", c.mode},
                     {"demo_id", c.demo_id},   {"language_source", c.language_source},
                     {"grasps", c.grasps},     {"failed", c.failed},
                     {"successes", c.successes}, {"mean_e_feat", c.mean_e_feat},
                     {"error", c.error}});
  }
  const json j = {{"format", "lensdff.ablation"},
                  {"version", AblationReport::kSchemaVersion},
                  {"seed", report.seed},
                  {"alignment", alignment},
                  {"representation", representation},
                  {"cells", cells}};
  return j.dump(2) + "\n";
}

AblationReport report_from_json(std::string_view text) {
  AblationReport rep;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "lensdff.ablation") throw Error(ErrorCode::MalformedFile, "not an ablation report");
    if (j.at("version") != AblationReport::kSchemaVersion) {
      throw Error(ErrorCode::MalformedFile, "unsupported report version " + j.at("version").dump());
    }
    rep.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& r : j.at("alignment")) rep.alignment.push_back(row_from(r));
    for (const auto& r : j.at("representation")) rep.representation.push_back(row_from(r));
    for (const auto& c : j.at("cells")) {
      AblationCell cell;
      cell.scene = c.at("scene").get<int>();
      cell.object = c.at("object").get<std::string>();
      cell.section = c.at("section").get<std::string>();
      cell.mode = c.at("mode").get<std::string>();
      cell.demo_id = c.at("demo_id").get<std::string>();
      cell.language_source = c.at("language_source").get<std::string>();
      cell.grasps = c.at("grasps").get<int>();
      cell.failed = c.at("failed").get<int>();
      cell.successes = c.at("successes").get<int>();
      cell.mean_e_feat = c.at("mean_e_feat").get<double>();
      cell.error = c.at("error").get<std::string>();
      rep.cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("bad ablation report: ") + e.what());
  }
  return rep;
}

std::string report_to_csv(const AblationReport& report) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < kReportCsvColumns.size(); ++i) out << (i ? "," : "") << kReportCsvColumns[i];
  out << "\n";
  for (const auto* rows : {&report.alignment, &report.representation}) {
    for (const auto& r : *rows) {
      out << r.section << "," << r.mode << "," << r.grasp_count << "," << r.failed_count << "," << r.success_count
          << "," << r.success_rate << "," << r.mean_final_e_feat << "\n";
    }
  }
  return out.str();
}

void emit_report(const AblationReport& report, const std::string& path, ReportFormat format) {
  io::write_file(path, format == ReportFormat::Json ? report_to_json(report) : report_to_csv(report));
}

}  // namespace lensdff
