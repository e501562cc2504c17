#include "lensdff/config.hpp"

#include <limits>
#include <set>

#include <json.hpp>

#include "lensdff/binary_io.hpp"

namespace lensdff {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

/// Strict view of one JSON object: typed reads, and unknown keys rejected on finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(where() + " must be a JSON object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) bad(where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) bad(where(key) + " must be an integer");
      const auto x = v->get<std::int64_t>();
      if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad(where(key) + " out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) bad(where(key) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) bad(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) bad(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_number()) {
        out = v->get<double>();
      } else {
        bad(where(key) + " must be null or a number");
      }
    }
  }
  void read(const char* key, std::optional<std::string>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
      } else if (v->is_string()) {
        out = v->get<std::string>();
      } else {
        bad(where(key) + " must be null or a string");
      }
    }
  }

  Section child(const char* key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, where(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) bad("unknown key '" + where(k.c_str()) + "'");
    }
  }

 private:
  std::string where(const char* key = nullptr) const {
    if (!key) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
}

void check_version(Section& root, int expected) {
  int version = expected;
  root.read("version", version);
  if (version != expected) {
    bad("unsupported config version " + std::to_string(version) + " (expected " + std::to_string(expected) + ")");
  }
}

struct FeatureSettings {
  double* tau;
  DistillOptions* distill;
  RetrievalReduce* reduce;
};

void read_features(Section s, FeatureSettings f) {
  s.read("tau", *f.tau);
  s.read("voxel", f.distill->voxel);
  s.read("normalize_vis", f.distill->normalize_vis);
  s.read("normal_k", f.distill->normal_k);
  std::string reduce(to_string(*f.reduce));
  s.read("retrieval_reduce", reduce);
  *f.reduce = parse_retrieval_reduce(reduce);
  s.finish();
}

json write_features(double tau, const DistillOptions& d, RetrievalReduce r) {
  return {{"tau", tau},
          {"voxel", d.voxel ? json(*d.voxel) : json(nullptr)},
          {"normalize_vis", d.normalize_vis},
          {"normal_k", d.normal_k},
          {"retrieval_reduce", to_string(r)}};
}

void read_sampler(Section s, SamplerConfig& c) {
  s.read("trans_noise_sigma", c.trans_noise_sigma);
  s.read("rot_noise_sigma", c.rot_noise_sigma);
  s.read("standoff", c.standoff);
  s.read("seed", c.seed);
  s.finish();
}

json write_sampler(const SamplerConfig& c) {
  return {{"trans_noise_sigma", c.trans_noise_sigma},
          {"rot_noise_sigma", c.rot_noise_sigma},
          {"standoff", c.standoff},
          {"seed", c.seed}};
}

void read_optimizer(Section s, OptimConfig& c) {
  s.read("iterations", c.iterations);
  s.read("learning_rate", c.learning_rate);
  s.read("lambda_norm", c.lambda_norm);
  s.read("n_seeds", c.n_seeds);
  s.read("knn_k", c.knn_k);
  s.read("eps", c.eps);
  s.read("fd_step", c.fd_step);
  s.read("rot6d_scale", c.rot6d_scale);
  std::string mode(to_string(c.gradient_mode));
  s.read("gradient_mode", mode);
  c.gradient_mode = parse_gradient_mode(mode);
  s.read("threads", c.threads);
  s.finish();
}

json write_optimizer(const OptimConfig& c) {
  return {{"iterations", c.iterations}, {"learning_rate", c.learning_rate},
          {"lambda_norm", c.lambda_norm}, {"n_seeds", c.n_seeds},
          {"knn_k", c.knn_k},           {"eps", c.eps},
          {"fd_step", c.fd_step},       {"rot6d_scale", c.rot6d_scale},
          {"gradient_mode", to_string(c.gradient_mode)}, {"threads", c.threads}};
}

void read_eval(Section s, EvalConfig& c) {
  s.read("contact_delta", c.contact_delta);
  s.read("penetration_margin", c.penetration_margin);
  s.read("close_step", c.close_step);
  s.finish();
}

json write_eval(const EvalConfig& c) {
  return {{"contact_delta", c.contact_delta},
          {"penetration_margin", c.penetration_margin},
          {"close_step", c.close_step}};
}

void read_synthetic(Section s, SyntheticConfig& c) {
  s.read("feature_dim", c.feature_dim);
  s.read("point_spacing", c.point_spacing);
  s.read("language_norm", c.language_norm);
  s.read("demo_prompt_cos", c.demo_prompt_cos);
  s.read("test_prompt_cos_min", c.test_prompt_cos_min);
  s.read("test_prompt_cos_max", c.test_prompt_cos_max);
  s.read("concept_gain", c.concept_gain);
  s.read("texture_bias", c.texture_bias);
  s.read("texture_peak", c.texture_peak);
  s.read("texture_width", c.texture_width);
  s.read("texture_slope", c.texture_slope);
  s.read("region_gain", c.region_gain);
  s.read("noise_correlation", c.noise_correlation);
  s.read("noise_length", c.noise_length);
  s.read("planted_gap", c.planted_gap);
  s.read("contact_delta", c.contact_delta);
  s.finish();
}

json write_synthetic(const SyntheticConfig& c) {
  return {{"feature_dim", c.feature_dim},
          {"point_spacing", c.point_spacing},
          {"language_norm", c.language_norm},
          {"demo_prompt_cos", c.demo_prompt_cos},
          {"test_prompt_cos_min", c.test_prompt_cos_min},
          {"test_prompt_cos_max", c.test_prompt_cos_max},
          {"concept_gain", c.concept_gain},
          {"texture_bias", c.texture_bias},
          {"texture_peak", c.texture_peak},
          {"texture_width", c.texture_width},
          {"texture_slope", c.texture_slope},
          {"region_gain", c.region_gain},
          {"noise_correlation", c.noise_correlation},
          {"noise_length", c.noise_length},
          {"planted_gap", c.planted_gap},
          {"contact_delta", c.contact_delta}};
}

}  // namespace

std::string_view to_string(GradientMode m) {
  return m == GradientMode::Analytic ? "analytic" : "finite_difference";
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "analytic") return GradientMode::Analytic;
  if (name == "finite_difference") return GradientMode::FiniteDifference;
  bad("gradient_mode must be 'analytic' or 'finite_difference', got '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  if (!(tau >= -1.0 && tau <= 1.0)) bad("features.tau must lie in [-1, 1]");
  if (distill.normal_k < 3) bad("features.normal_k must be >= 3");
  sampler_for_run().validate();
  optimizer.validate();
  eval.validate();
}

SamplerConfig RunConfig::sampler_for_run() const {
  SamplerConfig s = sampler;
  s.n_samples = optimizer.n_seeds;
  return s;
}

RunConfig run_config_from_json(std::string_view text) {
  const json j = parse(text);
  RunConfig cfg;
  Section root(j, "");
  check_version(root, RunConfig::kSchemaVersion);
  root.read("hand", cfg.hand_path);
  read_features(root.child("features"), {&cfg.tau, &cfg.distill, &cfg.retrieval_reduce});
  read_sampler(root.child("sampler"), cfg.sampler);
  read_optimizer(root.child("optimizer"), cfg.optimizer);
  read_eval(root.child("eval"), cfg.eval);
  root.finish();
  cfg.validate();
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j = {{"version", RunConfig::kSchemaVersion},
            {"hand", cfg.hand_path ? json(*cfg.hand_path) : json(nullptr)},
            {"features", write_features(cfg.tau, cfg.distill, cfg.retrieval_reduce)},
            {"sampler", write_sampler(cfg.sampler)},
            {"optimizer", write_optimizer(cfg.optimizer)},
            {"eval", write_eval(cfg.eval)}};
  return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    bad("cannot read config '" + path + "'");
  }
  return run_config_from_json(text);
}

BenchmarkConfig benchmark_config_from_json(std::string_view text) {
  const json j = parse(text);
  BenchmarkConfig cfg;
  Section root(j, "");
  check_version(root, RunConfig::kSchemaVersion);
  root.read("seed", cfg.seed);
  root.read("scenes", cfg.scenes);
  root.read("objects_per_scene", cfg.objects_per_scene);
  root.read("view_noise", cfg.view_noise);
  root.read("demo_views", cfg.demo_views);
  root.read("multi_test_views", cfg.multi_test_views);
  root.read("representation_rows", cfg.representation_rows);
  root.read("threads", cfg.threads);
  read_synthetic(root.child("synthetic"), cfg.synthetic);
  read_features(root.child("features"), {&cfg.tau, &cfg.distill, &cfg.retrieval_reduce});
  read_sampler(root.child("sampler"), cfg.sampler);
  read_optimizer(root.child("optimizer"), cfg.optimizer);
  read_eval(root.child("eval"), cfg.eval);
  root.finish();
  cfg.validate();
  return cfg;
}

std::string benchmark_config_to_json(const BenchmarkConfig& cfg) {
  json j = {{"version", RunConfig::kSchemaVersion},
            {"seed", cfg.seed},
            {"scenes", cfg.scenes},
            {"objects_per_scene", cfg.objects_per_scene},
            {"view_noise", cfg.view_noise},
            {"demo_views", cfg.demo_views},
            {"multi_test_views", cfg.multi_test_views},
            {"representation_rows", cfg.representation_rows},
            {"threads", cfg.threads},
            {"synthetic", write_synthetic(cfg.synthetic)},
            {"features", write_features(cfg.tau, cfg.distill, cfg.retrieval_reduce)},
            {"sampler", write_sampler(cfg.sampler)},
            {"optimizer", write_optimizer(cfg.optimizer)},
            {"eval", write_eval(cfg.eval)}};
  return j.dump(2) + "\n";
}

BenchmarkConfig load_benchmark_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    bad("cannot read benchmark config '" + path + "'");
  }
  return benchmark_config_from_json(text);
}

}  // namespace lensdff
