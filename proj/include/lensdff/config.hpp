#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "lensdff/demo.hpp"
#include "lensdff/eval.hpp"
#include "lensdff/features.hpp"
#include "lensdff/optimizer.hpp"
#include "lensdff/sampler.hpp"

namespace lensdff {

/// Everything a single pipeline run needs. Serialized as one JSON document:
///
///   { "version": 1, "hand": null | "path.hand.json",
///     "features":  { "tau", "voxel" (null or m), "normalize_vis", "normal_k", "retrieval_reduce" },
///     "sampler":   { "trans_noise_sigma", "rot_noise_sigma", "standoff", "seed" },
///     "optimizer": { "iterations", "learning_rate", "lambda_norm", "n_seeds", "knn_k", "eps",
///                    "fd_step", "rot6d_scale", "gradient_mode" ("analytic" | "finite_difference"), "threads" },
///     "eval":      { "contact_delta", "penetration_margin", "close_step" } }
///
/// Missing keys keep their defaults; unknown keys are rejected. The sampler
/// draws optimizer.n_seeds poses.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::optional<std::string> hand_path;
  double tau = kDefaultGateThreshold;
  DistillOptions distill;
  RetrievalReduce retrieval_reduce = RetrievalReduce::Mean;
  SamplerConfig sampler;
  OptimConfig optimizer;
  EvalConfig eval;

  void validate() const;
  /// Sampler settings with n_samples tied to the optimizer's seed count.
  SamplerConfig sampler_for_run() const;
};

/// Throws InvalidConfig on malformed JSON, type errors, unknown keys or
/// out-of-range values.
RunConfig run_config_from_json(std::string_view text);
std::string run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

/// Benchmark document: the RunConfig sections minus "hand", plus
/// "seed", "scenes", "objects_per_scene", "view_noise", "demo_views",
/// "multi_test_views", "representation_rows", "threads" and a "synthetic"
/// section mirroring SyntheticConfig.
BenchmarkConfig benchmark_config_from_json(std::string_view text);
std::string benchmark_config_to_json(const BenchmarkConfig& cfg);
BenchmarkConfig load_benchmark_config(const std::string& path);

std::string_view to_string(GradientMode m);
GradientMode parse_gradient_mode(std::string_view name);

}  // namespace lensdff
