#include "lensdff/config.hpp"
#include "support.hpp"

using namespace lensdff;

TEST_SUITE("config") {
  TEST_CASE("defaults round trip") {
    const std::string text = run_config_to_json(RunConfig{});
    CHECK(run_config_to_json(run_config_from_json(text)) == text);
    CHECK(run_config_to_json(run_config_from_json("{}")) == text);
  }

  TEST_CASE("shipped files match the library defaults") {
    CHECK(run_config_to_json(load_run_config(LENSDFF_DATA_DIR "/run_default.json")) ==
          run_config_to_json(RunConfig{}));
    CHECK(benchmark_config_to_json(load_benchmark_config(LENSDFF_DATA_DIR "/benchmark_default.json")) ==
          benchmark_config_to_json(BenchmarkConfig{}));
  }

  TEST_CASE("overrides are read") {
    const RunConfig c = run_config_from_json(R"({
      "version": 1, "hand": "h.hand.json",
      "features": {"tau": 0.5, "voxel": 0.004, "retrieval_reduce": "max"},
      "sampler": {"seed": 12},
      "optimizer": {"iterations": 7, "n_seeds": 4, "gradient_mode": "finite_difference"},
      "eval": {"close_step": 0.05}})");
    CHECK(c.hand_path == "h.hand.json");
    CHECK(c.tau == 0.5);
    CHECK(c.distill.voxel == 0.004);
    CHECK(c.retrieval_reduce == RetrievalReduce::Max);
    CHECK(c.sampler.seed == 12);
    CHECK(c.optimizer.iterations == 7);
    CHECK(c.optimizer.gradient_mode == GradientMode::FiniteDifference);
    CHECK(c.eval.close_step == 0.05);
    CHECK(c.sampler_for_run().n_samples == 4);
    CHECK(run_config_from_json(run_config_to_json(c)).distill.voxel == 0.004);
  }

  TEST_CASE("unknown keys are rejected") {
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimiser": {}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimizer": {"iters": 3}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(benchmark_config_from_json(R"({"synthetic": {"colour": 1}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(benchmark_config_from_json(R"({"hand": null})"), ErrorCode::InvalidConfig);
  }

  TEST_CASE("type errors") {
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimizer": {"iterations": "many"}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimizer": {"iterations": 2.5}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"features": {"normalize_vis": 1}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"sampler": []})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json("[]"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json("{"), ErrorCode::InvalidConfig);
  }

  TEST_CASE("range errors") {
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimizer": {"n_seeds": 0}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"optimizer": {"gradient_mode": "newton"}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(run_config_from_json(R"({"features": {"retrieval_reduce": "sum"}})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(benchmark_config_from_json(R"({"scenes": 0})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(benchmark_config_from_json(R"({"synthetic": {"noise_correlation": 2}})"),
                     ErrorCode::InvalidConfig);
  }

  TEST_CASE("version") {
    CHECK_NOTHROW(run_config_from_json(R"({"version": 1})"));
    CHECK_ERROR_CODE(run_config_from_json(R"({"version": 2})"), ErrorCode::InvalidConfig);
    CHECK_ERROR_CODE(benchmark_config_from_json(R"({"version": 0})"), ErrorCode::InvalidConfig);
  }

  TEST_CASE("benchmark round trip") {
    BenchmarkConfig b;
    b.scenes = 2;
    b.representation_rows = false;
    b.synthetic.noise_correlation = 0.25;
    b.optimizer.rot6d_scale = 0.5;
    const std::string text = benchmark_config_to_json(b);
    const BenchmarkConfig back = benchmark_config_from_json(text);
    CHECK(back.scenes == 2);
    CHECK_FALSE(back.representation_rows);
    CHECK(back.synthetic.noise_correlation == 0.25);
    CHECK(benchmark_config_to_json(back) == text);
  }

  TEST_CASE("unreadable file") {
    CHECK_ERROR_CODE(load_run_config("/nonexistent/run.json"), ErrorCode::InvalidConfig);
  }

  TEST_CASE("gradient mode names") {
    CHECK(parse_gradient_mode(to_string(GradientMode::Analytic)) == GradientMode::Analytic);
    CHECK(parse_gradient_mode("finite_difference") == GradientMode::FiniteDifference);
  }
}
