#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lensdff/features.hpp"
#include "lensdff/hand.hpp"

namespace lensdff {

/// Process exit codes of the command-line tool.
enum class ExitCode : int { Ok = 0, Runtime = 1, Usage = 2, Retrieval = 3, Optimization = 4 };

/// Maps library error codes onto exit codes.
ExitCode exit_code_for(ErrorCode code);

/// Runs the command-line tool. Diagnostics go to `err` as `LEVEL: message` lines.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Grasp file (.lgr), little-endian: "LGR1" | u32 count | count x f32[24]
// (15 joints, rot6d, translation).
std::string encode_grasps(const std::vector<Grasp>& grasps);
std::vector<Grasp> decode_grasps(std::string_view bytes);

/// Prompt feature file: {"prompt": "...", "feature": [...], "source": "demo" | "test" | "fused"}.
struct PromptFeature {
  std::string prompt;
  LanguageFeature language;
};

std::string prompt_feature_to_json(const PromptFeature& p);
PromptFeature prompt_feature_from_json(std::string_view text);

}  // namespace lensdff
