#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pivot/env.h"
#include "pivot/ppo.h"

namespace pivot {

struct EvalSettings {
  int episodes = 200;
  std::vector<uint64_t> seeds{0, 1, 2};
  // Episodes per seed for each domain-shift condition.
  int shift_episodes = 200;
  std::vector<double> phi_candidates;
  int phi_frames = 200;
};

// A resolved run configuration. `values` holds every key in canonical
// user-unit text ("section.key" -> value); the typed configs are derived from
// it and the digest hashes its sorted serialization.
struct RunConfig {
  EnvConfig env;
  PpoConfig train;
  EvalSettings eval;
  std::map<std::string, std::string> values;
  uint64_t digest = 0;

  // INI text that reloads to the same configuration and digest.
  std::string serialize() const;
  std::string digest_hex() const;
};

struct ConfigKey {
  std::string name;  // "section.key"
  std::string default_value;
  std::string help;
};

// Every accepted key with its default, in section order.
const std::vector<ConfigKey>& config_keys();

// Applies defaults, then the file (if any), then `overrides` of the form
// "section.key=value". Throws ConfigError on unknown keys, malformed values,
// invalid ranges, or values outside the supported randomization ranges unless
// `allow_out_of_range` is set.
RunConfig load_config(const std::optional<std::filesystem::path>& path,
                      const std::vector<std::string>& overrides = {}, bool allow_out_of_range = false);

// Same as load_config but reading INI text directly.
RunConfig parse_config(const std::string& ini_text, const std::vector<std::string>& overrides = {},
                       bool allow_out_of_range = false);

}  // namespace pivot
