#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "morl/envs.hpp"
#include "morl/meta.hpp"
#include "morl/rl.hpp"
#include "morl/scalarize.hpp"

namespace morl::harness {

enum class Method { kMeta, kRa, kBoth };

Method method_from_string(std::string_view name);
std::string to_string(Method method);

/// Everything a run needs. Flat dotted keys in the config file map onto the
/// nested fields here; unknown keys and type errors are hard errors listing
/// every offending key. The seed has no default on purpose.
struct ExperimentConfig {
  std::optional<EnvId> env;
  std::optional<std::uint64_t> seed;
  Method method = Method::kMeta;
  std::optional<double> gamma;  // unset picks the environment default
  int eval_episodes = 8;
  std::string out_dir = "out";
  int ra_iterations = 0;  // 0 derives the budget-matched count
  MetaConfig meta;
  PpoConfig ppo;
  ScalarizationSpec scalarization;
  std::string resume_path;  // CLI-only, not a config-file key

  EnvSpec env_spec() const;  // applies the gamma override
  double effective_gamma() const { return env_spec().gamma; }
};

/// Parse `key = value` lines ('#' comments, blank lines allowed).
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Serialize in canonical key order (deterministic; used by the manifest).
std::string config_to_text(const ExperimentConfig& cfg);

/// Check cross-field requirements (seed and env present, positive counts,
/// valid scalarization). Throws ConfigError listing every violated key.
void validate(const ExperimentConfig& cfg);

/// Budget-matched RA iteration count: total meta-method training episodes
/// divided across preference_count policies, rounded to nearest, min 1.
int derive_ra_iterations(const ExperimentConfig& cfg);

}  // namespace morl::harness
