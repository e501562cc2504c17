#include "lensdff/cli.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lensdff/binary_io.hpp"
#include "lensdff/config.hpp"
#include "lensdff/demo.hpp"
#include "lensdff/eval.hpp"
#include "lensdff/feature_io.hpp"
#include "lensdff/optimizer.hpp"
#include "lensdff/sampler.hpp"
#include "lensdff/synthetic.hpp"

namespace lensdff {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ExitCode exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return ExitCode::Usage;
    case ErrorCode::NoDemoForPrimitive: return ExitCode::Retrieval;
    case ErrorCode::AllSeedsFailed: return ExitCode::Optimization;
    default: return ExitCode::Runtime;
  }
}

std::string encode_grasps(const std::vector<Grasp>& grasps) {
  io::Writer w;
  w.bytes("LGR1");
  w.u32(static_cast<std::uint32_t>(grasps.size()));
  for (const Grasp& g : grasps) {
    const GraspVector v = g.to_vector();
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v[i]));
  }
  return w.take();
}

std::vector<Grasp> decode_grasps(std::string_view bytes) {
  io::Reader r(bytes, "grasp file");
  if (r.bytes(4) != "LGR1") r.fail("bad magic (expected LGR1)");
  const std::uint32_t n = r.u32();
  r.need(static_cast<std::size_t>(n) * kGraspDim * 4);
  std::vector<Grasp> out;
  out.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    GraspVector v;
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f32();
    out.push_back(Grasp::from_vector(v));
  }
  r.expect_end();
  return out;
}

std::string prompt_feature_to_json(const PromptFeature& p) {
  const std::vector<double> f(p.language.feature.data(), p.language.feature.data() + p.language.feature.size());
  json j = {{"prompt", p.prompt}, {"source", to_string(p.language.source)}, {"feature", f}};
  return j.dump() + "\n";
}

PromptFeature prompt_feature_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    PromptFeature p;
    p.prompt = j.value("prompt", std::string());
    const auto f = j.at("feature").get<std::vector<double>>();
    if (f.empty()) throw Error(ErrorCode::MalformedFile, "prompt feature is empty");
    p.language.feature = Eigen::Map<const FeatureVec>(f.data(), static_cast<Eigen::Index>(f.size()));
    const std::string src = j.value("source", std::string("demo"));
    if (src == "demo") p.language.source = LanguageSource::Demo;
    else if (src == "test") p.language.source = LanguageSource::Test;
    else if (src == "fused") p.language.source = LanguageSource::Fused;
    else throw Error(ErrorCode::MalformedFile, "unknown prompt feature source '" + src + "'");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("prompt feature file: ") + e.what());
  }
}

namespace {

/// Bad flag combinations detected after parsing; exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Log {
 public:
  Log(std::ostream& err, const bool& quiet) : err_(err), quiet_(quiet) {}
  void info(const std::string& m) const {
    if (!quiet_) err_ << "INFO: " << m << "\n";
  }
  void warn(const std::string& m) const { err_ << "WARN: " << m << "\n"; }
  void error(const std::string& m) const { err_ << "ERROR: " << m << "\n"; }

 private:
  std::ostream& err_;
  const bool& quiet_;
};

std::string primitive_list() {
  std::string s;
  for (GraspPrimitive p : kAllPrimitives) {
    if (!s.empty()) s += ", ";
    s += to_string(p);
  }
  return s;
}

GraspPrimitive primitive_arg(const std::string& name) {
  if (const auto p = parse_primitive(name)) return *p;
  throw UsageError("unknown primitive '" + name + "'; valid: " + primitive_list());
}

FeatureVec parse_inline_feature(const std::string& text) {
  std::string s = text;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<double> v;
  double x = 0.0;
  while (in >> x) v.push_back(x);
  if (!in.eof() || v.empty()) throw UsageError("inline feature must be a comma separated list of numbers");
  return Eigen::Map<const FeatureVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// --language <file> or --prompt-feature <inline>, exactly one.
LanguageFeature language_arg(const std::string& path, const std::string& inline_feature, LanguageSource source,
                             const char* what) {
  if (!path.empty() && !inline_feature.empty()) {
    throw UsageError(std::string("give the ") + what + " as a file or inline, not both");
  }
  if (!path.empty()) {
    LanguageFeature f = prompt_feature_from_json(io::read_file(path)).language;
    f.source = source;
    return f;
  }
  if (!inline_feature.empty()) return {parse_inline_feature(inline_feature), source};
  throw UsageError(std::string("missing ") + what);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

json matrix_rows(const Mat3d& m) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2)});
  return rows;
}

/// Flags shared by commands that run the pipeline; unset flags leave the config value.
struct RunOverrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> learning_rate;
  std::optional<double> lambda_norm;
  std::optional<int> n_seeds;
  std::optional<double> rot6d_scale;
  std::optional<std::string> gradient_mode;
  std::optional<double> tau;
  std::optional<double> voxel;
  std::optional<std::string> retrieval_reduce;

  void add_config(CLI::App* app) { app->add_option("--config", config, "Run configuration JSON"); }
  void add_features(CLI::App* app) {
    app->add_option("--tau", tau, "Prompt agreement threshold of the language gate");
    app->add_option("--voxel", voxel, "Voxel size in m for downsampling merged views (<= 0 disables)");
  }
  void add_retrieval(CLI::App* app) {
    app->add_option("--retrieval-reduce", retrieval_reduce, "Grasp feature reduction for retrieval: mean or max");
  }
  void add_sampler(CLI::App* app) {
    app->add_option("--seed", seed, "Sampler master seed");
    app->add_option("--n-seeds", n_seeds, "Number of sampled seeds to optimize");
  }
  void add_optimizer(CLI::App* app) {
    app->add_option("--iterations", iterations, "Gradient steps per seed");
    app->add_option("--learning-rate", learning_rate, "Gradient step size");
    app->add_option("--lambda-norm", lambda_norm, "Weight of the palm-axis term");
    app->add_option("--rot6d-scale", rot6d_scale, "Column norm of the seed rotation parameters");
    app->add_option("--gradient-mode", gradient_mode, "analytic or finite_difference");
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) cfg.sampler.seed = *seed;
    if (iterations) cfg.optimizer.iterations = *iterations;
    if (learning_rate) cfg.optimizer.learning_rate = *learning_rate;
    if (lambda_norm) cfg.optimizer.lambda_norm = *lambda_norm;
    if (n_seeds) cfg.optimizer.n_seeds = *n_seeds;
    if (rot6d_scale) cfg.optimizer.rot6d_scale = *rot6d_scale;
    if (gradient_mode) cfg.optimizer.gradient_mode = parse_gradient_mode(*gradient_mode);
    if (tau) cfg.tau = *tau;
    if (voxel) cfg.distill.voxel = *voxel;
    if (retrieval_reduce) cfg.retrieval_reduce = parse_retrieval_reduce(*retrieval_reduce);
    cfg.validate();
    return cfg;
  }
};

struct Globals {
  std::string hand;
  int threads = 0;
  bool quiet = false;
};

HandModel resolve_hand(const Globals& g, const std::optional<std::string>& config_hand) {
  if (!g.hand.empty()) return load_hand(g.hand);
  if (config_hand) return load_hand(*config_hand);
  return make_default_hand();
}

PointCloud load_object_cloud(const std::string& path) {
  const std::string bytes = io::read_file(path);
  if (bytes.starts_with("LDC1")) return decode_distilled_cloud(bytes).as_point_cloud();
  ViewFeatureCloud v = decode_feature_cloud(bytes);
  return v.cloud;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// ---------------------------------------------------------------------------

struct DistillArgs {
  std::vector<std::string> views;
  std::string language, prompt_feature, demo_language, demo_prompt_feature, out, source = "demo";
  bool raw = false;
  std::optional<int> normal_k;
  RunOverrides run;
};

int cmd_distill(const DistillArgs& a, const Log& log, std::ostream&) {
  RunConfig cfg = a.run.resolve();
  if (a.normal_k) cfg.distill.normal_k = *a.normal_k;
  const bool gated = !a.demo_language.empty() || !a.demo_prompt_feature.empty();
  LanguageSource src = LanguageSource::Demo;
  if (gated || a.source == "test") {
    src = LanguageSource::Test;
  } else if (a.source != "demo") {
    throw UsageError("--source must be demo or test");
  }
  LanguageFeature lang = language_arg(a.language, a.prompt_feature, src, "language feature");
  if (gated) {
    const LanguageFeature demo =
        language_arg(a.demo_language, a.demo_prompt_feature, LanguageSource::Demo, "demo language feature");
    lang = gate_language(demo, lang, cfg.tau);
    log.info("language gate chose the " + std::string(to_string(lang.source)) + " feature");
  }
  std::vector<ViewFeatureCloud> views;
  for (const auto& p : a.views) views.push_back(load_feature_cloud(p));
  const DistilledCloud dc = a.raw ? fuse_views_raw(views, lang, cfg.distill) : distill_views(views, lang, cfg.distill);
  ensure_parent(a.out);
  save_distilled_cloud(dc, a.out);
  log.info("distilled " + std::to_string(dc.size()) + " points from " + std::to_string(views.size()) +
           " views into " + a.out);
  return 0;
}

struct RetrieveArgs {
  std::string bundle, language, prompt_feature, primitive;
  RunOverrides run;
};

int cmd_retrieve(const RetrieveArgs& a, const Globals& g, const Log&, std::ostream& out) {
  const GraspPrimitive prim = primitive_arg(a.primitive);
  const RunConfig cfg = a.run.resolve();
  const HandModel hand = resolve_hand(g, cfg.hand_path);
  const DemoBundle bundle = load_bundle(a.bundle, hand);
  const LanguageFeature q = language_arg(a.language, a.prompt_feature, LanguageSource::Test, "query feature");
  const std::size_t i = retrieve_index(bundle, q, prim, cfg.retrieval_reduce);
  const DemoRecord& r = bundle.records[i];
  const GraspFeature& f = r.cached_grasp_feature;
  const double score = cosine_similarity(
      cfg.retrieval_reduce == RetrievalReduce::Mean ? f.mean_block() : f.max_block(), q.feature);
  const json j = {{"id", r.id}, {"prompt", r.prompt_text}, {"primitive", to_string(r.primitive)},
                  {"index", i}, {"cosine", score}};
  out << j.dump() << "\n";
  return 0;
}

struct SampleArgs {
  std::string cloud, primitive, out;
  RunOverrides run;
};

int cmd_sample(const SampleArgs& a, const Globals& g, const Log& log, std::ostream&) {
  const GraspPrimitive prim = primitive_arg(a.primitive);
  const RunConfig cfg = a.run.resolve();
  const HandModel hand = resolve_hand(g, cfg.hand_path);
  const PointCloud pc = load_distilled_cloud(a.cloud).as_point_cloud();
  const auto seeds = sample_palm_poses(pc, fit_obb(pc), cfg.sampler_for_run(), hand.eigengrasp(prim), hand.limits);
  json arr = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const GraspSeed& s = seeds[i];
    arr.push_back({{"index", i},
                   {"anchor", s.anchor_index},
                   {"primitive", to_string(s.primitive)},
                   {"translation", to_std(s.palm.translation)},
                   {"rotation", matrix_rows(s.palm.rotation)},
                   {"init_x_axis", to_std(s.init_x_axis)},
                   {"synergy", to_std(s.synergy_init)}});
  }
  ensure_parent(a.out);
  io::write_file(a.out, json{{"seeds", arr}}.dump(2) + "\n");
  log.info("wrote " + std::to_string(seeds.size()) + " seeds to " + a.out);
  return 0;
}

struct OptimizeArgs {
  std::string bundle, test, primitive, out, trace, language, prompt_feature;
  RunOverrides run;
};

json energy_json(const EnergyBreakdown& e) { return {{"e_feat", e.e_feat}, {"e_norm", e.e_norm}, {"total", e.total}}; }

int cmd_optimize(const OptimizeArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  const GraspPrimitive prim = primitive_arg(a.primitive);
  RunConfig cfg = a.run.resolve();
  if (g.threads > 0) cfg.optimizer.threads = g.threads;
  cfg.optimizer.record_states = true;
  const HandModel hand = resolve_hand(g, cfg.hand_path);
  const DemoBundle bundle = load_bundle(a.bundle, hand);
  const DistilledCloud test = load_distilled_cloud(a.test);
  const LanguageFeature query = a.language.empty() && a.prompt_feature.empty()
                                    ? test.language
                                    : language_arg(a.language, a.prompt_feature, LanguageSource::Test, "query");
  const DemoRecord& demo = retrieve(bundle, query, prim, cfg.retrieval_reduce);
  log.info("retrieved demo '" + demo.id + "'");

  const PointCloud pc = test.as_point_cloud();
  const EigengraspMap& map = hand.eigengrasp(prim);
  const auto seeds = sample_palm_poses(pc, fit_obb(pc), cfg.sampler_for_run(), map, hand.limits);
  const FeatureField field(test);
  const OptimResult res = optimize_batch(seeds, demo.cached_grasp_feature, field, hand, cfg.optimizer);

  std::vector<Grasp> ranked;
  json summary = json::array();
  for (int i : res.ranking) {
    const SeedResult& s = res.seeds[static_cast<std::size_t>(i)];
    ranked.push_back(s.best_grasp);
    summary.push_back({{"seed", i}, {"initial", energy_json(s.initial_energy)}, {"best", energy_json(s.best_energy)}});
  }
  for (const SeedResult& s : res.seeds) {
    if (s.failed) log.warn("seed " + std::to_string(s.seed_index) + " failed: " + s.failure);
  }
  ensure_parent(a.out);
  io::write_file(a.out, encode_grasps(ranked));

  const std::string trace_path = a.trace.empty() ? a.out + ".trace.jsonl" : a.trace;
  std::string lines;
  for (const SeedResult& s : res.seeds) {
    for (std::size_t t = 0; t < s.trace.size(); ++t) {
      const ReducedGrasp st = ReducedGrasp::unflatten(s.states[t]);
      json j = {{"seed", s.seed_index}, {"iteration", t}};
      j.update(energy_json(s.trace[t]));
      j["best_total"] = s.best_so_far[t];
      j["pose"] = {{"translation", to_std(st.translation)},
                   {"rot6d", to_std(rotation_to_rot6d(st.palm().rotation))},
                   {"synergy", to_std(st.synergy)}};
      lines += j.dump() + "\n";
    }
  }
  ensure_parent(trace_path);
  io::write_file(trace_path, lines);
  log.info("wrote " + std::to_string(ranked.size()) + " ranked grasps to " + a.out + " and the trace to " +
           trace_path);
  out << json{{"demo", demo.id}, {"primitive", to_string(prim)}, {"grasps", summary}}.dump() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string grasps, object, primitive, out, config;
  bool no_close = false;
};

int cmd_evaluate(const EvaluateArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  const GraspPrimitive prim = primitive_arg(a.primitive);
  const RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  const HandModel hand = resolve_hand(g, cfg.hand_path);
  const auto grasps = decode_grasps(io::read_file(a.grasps));
  const SurfaceQuery surface(load_object_cloud(a.object));
  const EigengraspMap& map = hand.eigengrasp(prim);
  json rows = json::array();
  int successes = 0;
  for (std::size_t i = 0; i < grasps.size(); ++i) {
    const Grasp gr = a.no_close ? grasps[i] : close_fingers(grasps[i], hand, map, surface, cfg.eval);
    const StabilityReport r = contact_check(gr, hand, surface, cfg.eval.contact_delta, cfg.eval.penetration_margin);
    successes += r.success;
    json fingers = json::array();
    for (bool c : r.finger_contact) fingers.push_back(c);
    rows.push_back({{"grasp", i},
                    {"success", r.success},
                    {"contact_count", r.contact_count},
                    {"finger_contact", fingers},
                    {"min_clearance", r.min_clearance},
                    {"min_palm_clearance", r.min_palm_clearance},
                    {"penetrating_palm_points", r.penetrating_palm_points}});
  }
  const json doc = {{"grasps", grasps.size()}, {"successes", successes}, {"reports", rows}};
  if (a.out.empty()) {
    out << doc.dump(2) << "\n";
  } else {
    ensure_parent(a.out);
    io::write_file(a.out, doc.dump(2) + "\n");
  }
  log.info(std::to_string(successes) + " of " + std::to_string(grasps.size()) + " grasps pass the contact check");
  return 0;
}

struct AblateArgs {
  std::string benchmark, out;
  std::vector<std::string> formats;
  std::optional<int> scenes;
  std::optional<std::uint64_t> seed;
  bool no_representation = false;
};

int cmd_ablate(const AblateArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  BenchmarkConfig cfg = a.benchmark.empty() ? BenchmarkConfig{} : load_benchmark_config(a.benchmark);
  if (a.scenes) cfg.scenes = *a.scenes;
  if (a.seed) cfg.seed = *a.seed;
  if (a.no_representation) cfg.representation_rows = false;
  if (g.threads > 0) cfg.threads = g.threads;
  cfg.validate();
  std::vector<ReportFormat> formats;
  for (const auto& f : a.formats.empty() ? std::vector<std::string>{"json"} : a.formats) {
    if (f == "json") formats.push_back(ReportFormat::Json);
    else if (f == "csv") formats.push_back(ReportFormat::Csv);
    else throw UsageError("--format must be json or csv, got '" + f + "'");
  }
  const HandModel hand = resolve_hand(g, std::nullopt);
  log.info("running " + std::to_string(cfg.scenes) + " scenes");
  const AblationReport rep = run_benchmark(cfg, hand);
  fs::create_directories(a.out);
  for (ReportFormat f : formats) {
    const std::string path = (fs::path(a.out) / (f == ReportFormat::Json ? "ablation.json" : "ablation.csv")).string();
    emit_report(rep, path, f);
    log.info("wrote " + path);
  }
  int failed_cells = 0;
  for (const auto& c : rep.cells) {
    if (!c.error.empty()) {
      ++failed_cells;
      log.warn("scene " + std::to_string(c.scene) + " " + c.object + " " + c.mode + ": " + c.error);
    }
  }
  out << report_to_csv(rep);
  if (!rep.cells.empty() && failed_cells == static_cast<int>(rep.cells.size())) {
    log.error("every ablation cell failed");
    return static_cast<int>(ExitCode::Runtime);
  }
  return 0;
}

struct DemoPackArgs {
  std::string manifest, out;
};

int cmd_demo_pack(const DemoPackArgs& a, const Globals& g, const Log& log, std::ostream&) {
  const HandModel hand = resolve_hand(g, std::nullopt);
  json m;
  try {
    m = json::parse(io::read_file(a.manifest));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("demo manifest: ") + e.what());
  }
  const fs::path base = fs::path(a.manifest).parent_path();
  GraspFeatureParams params;
  std::vector<DemoRecord> records;
  try {
    if (m.contains("grasp_feature")) {
      params.k = m["grasp_feature"].value("k", params.k);
      params.eps = m["grasp_feature"].value("eps", params.eps);
    }
    for (const auto& r : m.at("records")) {
      const auto prim = parse_primitive(r.at("primitive").get<std::string>());
      if (!prim) throw Error(ErrorCode::InvalidConfig, "demo manifest: unknown primitive; valid: " + primitive_list());
      const auto gv = r.at("grasp").get<std::vector<double>>();
      if (gv.size() != kGraspDim) throw Error(ErrorCode::InvalidConfig, "demo manifest: grasp needs 24 numbers");
      const GraspVector v = Eigen::Map<const GraspVector>(gv.data());
      const DistilledCloud cloud = load_distilled_cloud((base / r.at("cloud").get<std::string>()).string());
      records.push_back(make_demo_record(r.at("id").get<std::string>(), r.value("prompt", std::string()), *prim,
                                         Grasp::from_vector(v), cloud, hand, params));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("demo manifest: ") + e.what());
  }
  const DemoBundle bundle = make_bundle(hand, std::move(records), params);
  ensure_parent(a.out);
  save_bundle(bundle, a.out);
  log.info("packed " + std::to_string(bundle.records.size()) + " demos into " + a.out);
  return 0;
}

struct SynthArgs {
  std::string out, benchmark;
  std::optional<std::uint64_t> seed;
  int scene = 0;
};

int cmd_synth(const SynthArgs& a, const Globals& g, const Log& log, std::ostream&) {
  BenchmarkConfig cfg = a.benchmark.empty() ? BenchmarkConfig{} : load_benchmark_config(a.benchmark);
  if (a.seed) cfg.seed = *a.seed;
  const HandModel hand = resolve_hand(g, std::nullopt);
  const SyntheticWorld world = make_world(cfg.synthetic, cfg.seed);
  const fs::path root(a.out);
  fs::create_directories(root / "demo");
  fs::create_directories(root / "scene");
  const auto& sc = cfg.synthetic;

  json manifest = {{"version", 1}, {"grasp_feature", {{"k", cfg.optimizer.knn_k}, {"eps", cfg.optimizer.eps}}}};
  json records = json::array();
  for (int c = 0; c < static_cast<int>(world.categories.size()); ++c) {
    const CategorySpec& spec = world.category(c);
    const SceneObject demo = make_demo_object(world, c, hand);
    const auto views = orbit_views(demo, cfg.demo_views, 0.3, derive_seed(world.seed, 500 + static_cast<std::uint64_t>(c)),
                                   cfg.view_noise, sc.noise_correlation, sc.noise_length);
    for (std::size_t v = 0; v < views.size(); ++v) {
      save_feature_cloud(views[v], (root / "demo" / (spec.name + "-view" + std::to_string(v) + ".lfc")).string());
    }
    io::write_file((root / "demo" / (spec.name + ".lang.json")).string(),
                   prompt_feature_to_json({spec.prompt, demo.language}));
    const GraspVector gv = demo.planted->to_vector();
    records.push_back({{"id", spec.name},
                       {"prompt", spec.prompt},
                       {"primitive", to_string(spec.primitive)},
                       {"cloud", spec.name + ".ldc"},
                       {"grasp", std::vector<double>(gv.data(), gv.data() + gv.size())}});
  }
  manifest["records"] = records;
  io::write_file((root / "demo" / "manifest.json").string(), manifest.dump(2) + "\n");

  const SyntheticScene scene = make_scene(world, a.scene, cfg.objects_per_scene);
  json objects = json::array();
  for (std::size_t j = 0; j < scene.objects.size(); ++j) {
    const SceneObject& o = scene.objects[j];
    const auto views = orbit_views(o, 1, 0.0, derive_seed(cfg.seed, 4000 + j), cfg.view_noise,
                                   sc.noise_correlation, sc.noise_length);
    save_feature_cloud(views.front(), (root / "scene" / (o.name + "-view0.lfc")).string());
    io::write_file((root / "scene" / (o.name + ".lang.json")).string(), prompt_feature_to_json({o.prompt, o.language}));
    ViewFeatureCloud full;
    full.cloud = o.cloud();
    full.features = o.base_features;
    save_feature_cloud(full, (root / "scene" / (o.name + ".object.lfc")).string());
    objects.push_back({{"name", o.name},
                       {"category", world.category(o.category).name},
                       {"primitive", to_string(o.primitive)},
                       {"views", {o.name + "-view0.lfc"}},
                       {"language", o.name + ".lang.json"},
                       {"object", o.name + ".object.lfc"}});
  }
  io::write_file((root / "scene" / "scene.json").string(),
                 json{{"seed", scene.seed}, {"objects", objects}}.dump(2) + "\n");
  log.info("wrote demos for " + std::to_string(world.categories.size()) + " categories and " +
           std::to_string(scene.objects.size()) + " scene objects under " + a.out);
  return 0;
}

struct ExportHandArgs {
  std::string out;
};

int cmd_export_hand(const ExportHandArgs& a, const Globals& g, const Log& log, std::ostream&) {
  const HandModel hand = resolve_hand(g, std::nullopt);
  ensure_parent(a.out);
  save_hand(hand, a.out);
  log.info("wrote hand '" + hand.name + "' to " + a.out);
  return 0;
}

struct ReportArgs {
  std::string trace;
};

int cmd_report(const ReportArgs& a, const Log&, std::ostream& out) {
  std::istringstream in(io::read_file(a.trace));
  struct Summary {
    double first = 0.0, best = 0.0, last_feat = 0.0;
    int steps = 0;
  };
  std::map<int, Summary> seeds;
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      Summary& s = seeds[j.at("seed").get<int>()];
      if (s.steps == 0) s.first = j.at("total").get<double>();
      s.best = j.at("best_total").get<double>();
      s.last_feat = j.at("e_feat").get<double>();
      ++s.steps;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedFile, std::string("trace: ") + e.what());
  }
  out << "seed,evaluations,initial_total,best_total,final_e_feat\n";
  out.precision(10);
  for (const auto& [k, s] : seeds) {
    out << k << "," << s.steps << "," << s.first << "," << s.best << "," << s.last_feat << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Globals g;
  const Log log(err, g.quiet);

  CLI::App app{"Few-shot dexterous grasp synthesis on distilled feature clouds", "lensdff"};
  app.set_help_all_flag("--help-all", "Print help for every command");
  app.require_subcommand(1);
  app.add_option("--hand", g.hand, "Hand description (.hand.json); default: built-in hand");
  app.add_option("--threads", g.threads, "Worker threads (0: LENSDFF_THREADS or all cores)");
  app.add_flag("-q,--quiet", g.quiet, "Suppress INFO diagnostics");
  app.footer("Exit codes: 0 ok, 1 runtime error, 2 usage or config error, 3 retrieval error, 4 optimization failure.");

  DistillArgs da;
  auto* distill = app.add_subcommand("distill", "Fuse view feature clouds (.lfc) into a distilled cloud (.ldc)");
  distill->add_option("--views", da.views, "View feature clouds")->required()->expected(1, -1);
  distill->add_option("--language", da.language, "Prompt feature file of these views");
  distill->add_option("--prompt-feature", da.prompt_feature, "Inline prompt feature, comma separated");
  distill->add_option("--demo-language", da.demo_language, "Demo prompt feature file; enables the language gate");
  distill->add_option("--demo-prompt-feature", da.demo_prompt_feature, "Inline demo prompt feature");
  distill->add_option("--source", da.source, "Role of the views without a gate: demo or test");
  distill->add_flag("--raw", da.raw, "Merge raw vision features without language enhancement");
  distill->add_option("--normal-k", da.normal_k, "Neighbours for normal estimation");
  distill->add_option("--out", da.out, "Output .ldc")->required();
  da.run.add_config(distill);
  da.run.add_features(distill);

  RetrieveArgs ra;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Pick the demo that best matches a prompt feature");
  retrieve_cmd->add_option("--demo-bundle", ra.bundle, "Demo bundle (.demo)")->required();
  retrieve_cmd->add_option("--language", ra.language, "Query prompt feature file");
  retrieve_cmd->add_option("--prompt-feature", ra.prompt_feature, "Inline query prompt feature");
  retrieve_cmd->add_option("--primitive", ra.primitive, "Grasp primitive: " + primitive_list())->required();
  ra.run.add_config(retrieve_cmd);
  ra.run.add_retrieval(retrieve_cmd);

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Sample initial palm poses on a distilled cloud");
  sample->add_option("--cloud", sa.cloud, "Distilled cloud (.ldc)")->required();
  sample->add_option("--primitive", sa.primitive, "Grasp primitive: " + primitive_list())->required();
  sample->add_option("--out", sa.out, "Output seeds JSON")->required();
  sa.run.add_config(sample);
  sa.run.add_sampler(sample);

  OptimizeArgs oa;
  auto* optimize_cmd = app.add_subcommand("optimize", "Retrieve, sample and optimize grasps on a test cloud");
  optimize_cmd->add_option("--demo-bundle", oa.bundle, "Demo bundle (.demo)")->required();
  optimize_cmd->add_option("--test", oa.test, "Test distilled cloud (.ldc)")->required();
  optimize_cmd->add_option("--primitive", oa.primitive, "Grasp primitive: " + primitive_list())->required();
  optimize_cmd->add_option("--out", oa.out, "Ranked grasps (.lgr)")->required();
  optimize_cmd->add_option("--trace", oa.trace, "JSON-lines trace; default <out>.trace.jsonl");
  optimize_cmd->add_option("--language", oa.language, "Retrieval query file; default: the test cloud's feature");
  optimize_cmd->add_option("--prompt-feature", oa.prompt_feature, "Inline retrieval query");
  oa.run.add_config(optimize_cmd);
  oa.run.add_retrieval(optimize_cmd);
  oa.run.add_sampler(optimize_cmd);
  oa.run.add_optimizer(optimize_cmd);

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Close fingers and run the contact check on grasps");
  evaluate->add_option("--grasps", ea.grasps, "Grasps (.lgr)")->required();
  evaluate->add_option("--object", ea.object, "Object cloud with normals (.lfc or .ldc)")->required();
  evaluate->add_option("--primitive", ea.primitive, "Grasp primitive: " + primitive_list())->required();
  evaluate->add_option("--config", ea.config, "Run configuration JSON (eval section)");
  evaluate->add_flag("--no-close", ea.no_close, "Check the grasps as given, without closing the fingers");
  evaluate->add_option("--out", ea.out, "Report JSON; default stdout");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Run the synthetic alignment and representation ablation");
  ablate->add_option("--benchmark", aa.benchmark, "Benchmark configuration JSON; default: built-in");
  ablate->add_option("--out", aa.out, "Output directory")->required();
  ablate->add_option("--format", aa.formats, "Report formats: json, csv (repeatable)")->expected(1, -1);
  ablate->add_option("--scenes", aa.scenes, "Number of scenes");
  ablate->add_option("--seed", aa.seed, "Benchmark master seed");
  ablate->add_flag("--no-representation", aa.no_representation, "Skip the representation rows");

  DemoPackArgs pa;
  auto* pack = app.add_subcommand("demo-pack", "Build a demo bundle from a manifest of distilled demos");
  pack->add_option("--manifest", pa.manifest, "Manifest JSON: records with id, prompt, primitive, cloud, grasp")
      ->required();
  pack->add_option("--out", pa.out, "Output bundle (.demo)")->required();

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "Write synthetic demo views and a test scene");
  synth->add_option("--out", ya.out, "Output directory")->required();
  synth->add_option("--benchmark", ya.benchmark, "Benchmark configuration JSON for the generator settings");
  synth->add_option("--seed", ya.seed, "World seed");
  synth->add_option("--scene", ya.scene, "Scene index");

  ExportHandArgs ha;
  auto* export_hand = app.add_subcommand("export-hand", "Write the hand description as JSON");
  export_hand->add_option("--out", ha.out, "Output .hand.json")->required();

  ReportArgs pr;
  auto* report = app.add_subcommand("report", "Summarize an optimization trace per seed as CSV");
  report->add_option("--trace", pr.trace, "JSON-lines trace")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Usage);
  }

  try {
    if (*distill) return cmd_distill(da, log, out);
    if (*retrieve_cmd) return cmd_retrieve(ra, g, log, out);
    if (*sample) return cmd_sample(sa, g, log, out);
    if (*optimize_cmd) return cmd_optimize(oa, g, log, out);
    if (*evaluate) return cmd_evaluate(ea, g, log, out);
    if (*ablate) return cmd_ablate(aa, g, log, out);
    if (*pack) return cmd_demo_pack(pa, g, log, out);
    if (*synth) return cmd_synth(ya, g, log, out);
    if (*export_hand) return cmd_export_hand(ha, g, log, out);
    if (*report) return cmd_report(pr, log, out);
  } catch (const UsageError& e) {
    log.error(e.what());
    return static_cast<int>(ExitCode::Usage);
  } catch (const Error& e) {
    log.error(e.what());
    return static_cast<int>(exit_code_for(e.code()));
  } catch (const std::exception& e) {
    log.error(e.what());
    return static_cast<int>(ExitCode::Runtime);
  }
  return static_cast<int>(ExitCode::Usage);
}

}  // namespace lensdff
