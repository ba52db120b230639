#pragma once

#include <optional>
#include <string>
#include <vector>

#include "morl/harness/config.hpp"
#include "morl/pareto.hpp"
#include "morl/rl.hpp"

namespace morl::harness {

struct RunArtifacts {
  std::string out_dir;
  std::string history_path;
  std::string manifest_path;
  std::vector<std::string> front_paths;
  std::vector<std::string> archive_paths;
  std::vector<std::string> checkpoint_paths;
  std::string comparison_path;  // both mode only
  std::vector<std::string> svg_paths;

  EpisodeTally tally;
  std::optional<double> meta_hypervolume;
  std::optional<double> ra_hypervolume;
  bool numerical_failure = false;  // a whole phase produced nothing usable
};

/// Full experiment per the configured method. meta: meta-training, then one
/// fine-tuned policy per preference with the hypervolume recorded after
/// every fine-tune iteration. ra: the radial baseline. both: the two with
/// budget-matched episode counts, disjoint stream subtrees, and a
/// comparison CSV. All artifacts are written atomically.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

}  // namespace morl::harness
