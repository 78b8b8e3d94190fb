#pragma once

// Stage orchestration over a JSON config. Every stage reads upstream artifacts
// from the output directory, writes its own files plus manifest_<stage>.json.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tag2cred/error.hpp"

namespace tag2cred::pipeline {

inline constexpr int kSchemaVersion = 1;

// Expands ${NAME} from the environment; an unset variable is ConfigInvalid.
std::string interpolate(std::string_view s, const std::function<std::optional<std::string>(const std::string&)>& env);
std::string interpolate(std::string_view s);

nlohmann::json default_config();

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> threads;
};

struct PipelineConfig {
  nlohmann::json snapshot;  // defaults merged with the file; ${VAR} references left as written
  std::string hash;         // sha256 of the snapshot without out_dir
  std::string base_dir;     // relative input paths resolve against this
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // Interpolated string at a JSON pointer such as "/tagger/endpoint".
  std::string str(const std::string& pointer) const;
  // Input path at /paths/<key>, resolved against base_dir; empty when unset.
  std::string path(const std::string& key) const;
  const nlohmann::json& at(const std::string& pointer) const;
};

// Unknown keys and type mismatches are ConfigInvalid.
PipelineConfig config_from_json(const nlohmann::json& user, const std::string& base_dir, const Overrides& o = {});
PipelineConfig load_config(const std::string& path, const Overrides& o = {});

const std::vector<std::string>& stage_names();
void run_stage(const std::string& stage, const PipelineConfig& cfg);

struct DemoOptions {
  std::uint64_t seed = 7;
  std::size_t messages = 5000;
  std::string out_dir = "demo_out";
  std::size_t threads = 1;
};
// Generates a synthetic corpus under <out_dir>/input, writes <out_dir>/config.json
// and runs every stage in order. Returns the config used.
PipelineConfig run_demo(const DemoOptions& opts);

int exit_code(Errc e);

}  // namespace tag2cred::pipeline
