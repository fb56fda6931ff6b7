#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "gibbsflow/system.hpp"

namespace gf {

using json = nlohmann::json;

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
  std::string experiment;
  SystemSpec system;
  std::string system_source;  // preset name, or "config"
  std::uint64_t seed = 1;
  int N = 1024;               // grid nodes per element for the base operator
  json parameters;            // complete: defaults filled in, ranges checked
  int jobs = 1;
  std::string out_dir = "gibbsflow-out";

  // Everything that determines the outputs (jobs and out_dir excluded).
  json resolved() const;
  std::uint64_t hash() const;
};

struct Overrides {
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;  // GIBBSFLOW_SEED
  std::optional<int> jobs;
  std::optional<std::string> out_dir;
};

// Throws ConfigError with a JSON pointer for unknown keys, wrong types and
// out-of-range values; nothing is computed before this succeeds.
ExperimentConfig parse_config(const json& doc, std::string_view experiment, const Overrides& ov = {});
ExperimentConfig load_config(const std::string& path, std::string_view experiment, const Overrides& ov = {});

SystemSpec system_from_json(const json& j, const std::string& pointer = "/system");
json system_to_json(const SystemSpec& s);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace gf
