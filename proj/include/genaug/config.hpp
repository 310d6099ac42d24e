#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "genaug/eval.hpp"
#include "genaug/pipeline.hpp"
#include "genaug/train.hpp"

namespace genaug {

inline constexpr const char* kToolVersion = "0.1.0";

// Format versions of the binary artifacts this tool reads and writes.
nlohmann::json artifact_versions();

// JSON round-trips. from_* functions start from defaults (method presets for
// TrainConfig) and overwrite the keys present; unknown keys are ConfigErrors.
nlohmann::json transform_to_json(const TransformSpec& spec);
TransformSpec transform_from_json(const nlohmann::json& j);

nlohmann::json pipeline_to_json(const PipelineSpec& spec);
PipelineSpec pipeline_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json probe_config_to_json(const ProbeConfig& config);
ProbeConfig probe_config_from_json(const nlohmann::json& j);

// Recursive merge: overrides win; nested objects merge key-by-key, everything
// else (arrays, scalars) is replaced wholesale.
nlohmann::json merge_json(const nlohmann::json& base,
                          const nlohmann::json& overrides);

// Parse a JSON file. Missing file -> IoError, malformed JSON -> ConfigError.
nlohmann::json load_json_file(const std::string& path);
void save_json_file(const nlohmann::json& j, const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Hash of the fully resolved config: serialize (sorted keys, canonical float
// formatting) and FNV-1a the dump, so identical configs hash identically
// regardless of how they were supplied.
std::uint64_t config_hash(const nlohmann::json& resolved);
std::uint64_t train_config_hash(const TrainConfig& config);
std::uint64_t probe_config_hash(const ProbeConfig& config);

// Every CLI command drops one of these next to its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;
};

std::string iso8601_utc_now();
nlohmann::json manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace genaug
