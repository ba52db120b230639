#pragma once

#include <string>
#include <utility>

#include "morl/meta.hpp"
#include "morl/nnet.hpp"

namespace morl::harness {

/// Structured-text parameter checkpoint: format-version line, explicit
/// shapes, decimal floats at 17 significant digits. load(save(x)) is
/// bit-exact. Truncated or version-mismatched files refuse to load.
void save_checkpoint(const PolicyParams& policy, const ValueParams& value,
                     const std::string& path);
std::pair<PolicyParams, ValueParams> load_checkpoint(const std::string& path);

/// Full training snapshot for resume: parameters plus iteration index,
/// episode tallies and the history rows accumulated so far.
struct TrainState {
  int iteration = 0;
  std::int64_t train_episodes = 0;
  std::int64_t eval_episodes = 0;
  PolicyParams policy;
  ValueParams value;
  TrainHistory history;
};

void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

/// Write content to path atomically (temp file in the same directory, then
/// rename), so a crash never leaves a partial artifact behind.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace morl::harness
