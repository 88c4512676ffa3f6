#pragma once

// Experiment configuration: one flat namespace of keys named after the fields
// of EnvConfig, AgentConfig and LoopConfig. Files are JSON objects or
// "key = value" lines ('#' starts a comment).

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrail/bilevel_loop.hpp"
#include "vrail/dqn_agent.hpp"
#include "vrail/taxi_env.hpp"

namespace vrail::config {

struct ExperimentConfig {
  taxi::EnvConfig env;
  dqn::AgentConfig agent;
  bilevel::LoopConfig loop;
};

/// Every recognized key.
const std::vector<std::string>& known_keys();

/// Applies each entry of a flat JSON object. Unknown keys and mistyped values throw.
void apply(ExperimentConfig& cfg, const nlohmann::json& values);
/// Applies a single "key" / textual value pair (as from a key=value line or a flag).
void apply(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Parses JSON when the first non-blank character is '{', key=value lines otherwise.
nlohmann::json parse_config_text(std::string_view text);
void load_file(ExperimentConfig& cfg, const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace vrail::config
