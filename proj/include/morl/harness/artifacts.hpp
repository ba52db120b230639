#pragma once

#include <string>
#include <vector>

#include "morl/pareto.hpp"

namespace morl::harness {

/// One row of the run history CSV. Meta-training rows leave the hypervolume
/// columns empty; fine-tuning rows fill them.
struct HistoryRow {
  std::string phase;       // meta | finetune | ra
  int policy_id = -1;      // -1 when not per-policy
  int iteration = 0;
  std::int64_t episodes = 0;  // cumulative training episodes
  double surrogate = 0.0;
  double value_loss = 0.0;
  double mean_kl = 0.0;
  bool skipped = false;
  bool has_hypervolume = false;
  double hv_front = 0.0;    // hypervolume of the current front
  double hv_archive = 0.0;  // hypervolume of everything seen so far
};

std::string history_csv(const std::vector<HistoryRow>& rows);

/// Front CSV: header policy_id,omega_0..omega_{q-1},ret_0..ret_{q-1},valid,
/// non_dominated; rows sorted by policy_id; '\n' newlines; floats at 17
/// significant digits so reloading reproduces the vectors exactly.
std::string front_csv(const ParetoArchive& archive);
ParetoArchive parse_front_csv(const std::string& text);

/// Archive document: structured text with the reference point and
/// hypervolume when set. The `pareto` subcommand round-trips this.
std::string archive_to_text(const ParetoArchive& archive);
ParetoArchive parse_archive_text(const std::string& text);
ParetoArchive load_archive(const std::string& path);

/// Minimal scatter of the first two objectives; non-dominated entries get a
/// ring marker, invalid ones are grayed out.
std::string front_svg(const ParetoArchive& archive);

}  // namespace morl::harness
