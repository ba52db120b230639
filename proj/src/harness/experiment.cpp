#include "morl/harness/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "morl/errors.hpp"
#include "morl/harness/artifacts.hpp"
#include "morl/harness/checkpoint.hpp"
#include "morl/harness/text.hpp"
#include "morl/meta.hpp"

namespace morl::harness {
namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct MetaPhaseResult {
  PolicyParams policy;
  ValueParams value;
  std::vector<PreferenceVector> prefs;
  // returns[i][k]: evaluation of preference i's policy after k fine-tune
  // iterations (k = 0 is the meta-policy itself).
  std::vector<std::vector<Eigen::VectorXd>> returns;
  std::vector<HistoryRow> meta_rows;
};

double safe_hypervolume(const std::vector<Eigen::VectorXd>& points, const Eigen::VectorXd& ref) {
  if (points.empty() || ref.size() == 0) return 0.0;
  return hypervolume(points, ref);
}

// radial_weights needs n >= 2; a single-policy front gets the centroid.
std::vector<PreferenceVector> front_preferences(int q, int n) {
  if (n == 1) return {PreferenceVector::normalized(Eigen::VectorXd::Ones(q))};
  return radial_weights(q, n);
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const EnvSpec spec = cfg.env_spec();
  const double gamma = spec.gamma;
  const int q = spec.num_objectives;
  const int num_prefs = cfg.meta.preference_count;
  const int finetune_iters = cfg.meta.finetune_iterations;

  RunArtifacts artifacts;
  artifacts.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);

  RngStream root(*cfg.seed);
  EpisodeTally tally;
  std::vector<HistoryRow> history;

  const bool do_meta = cfg.method == Method::kMeta || cfg.method == Method::kBoth;
  const bool do_ra = cfg.method == Method::kRa || cfg.method == Method::kBoth;

  std::optional<MetaPhaseResult> meta_result;
  std::vector<PreferenceVector> ra_weights;
  std::vector<PolicyParams> ra_policies;
  std::vector<bool> ra_failed;
  std::vector<HistoryRow> ra_rows;

  // ---- meta pipeline: train, then fine-tune one policy per preference ----
  if (do_meta) {
    MetaPhaseResult phase;
    TrainStart resume_start;
    const TrainStart* resume = nullptr;
    if (!cfg.resume_path.empty()) {
      TrainState state = load_train_state(cfg.resume_path);
      resume_start.policy = std::move(state.policy);
      resume_start.value = std::move(state.value);
      resume_start.start_iteration = state.iteration;
      resume_start.history = std::move(state.history);
      tally.train = state.train_episodes;
      tally.eval = state.eval_episodes;
      resume = &resume_start;
    }

    const CheckpointHook checkpoint_hook = [&](int completed, const TrainResult& state) {
      TrainState snapshot;
      snapshot.iteration = completed;
      snapshot.train_episodes = tally.train;
      snapshot.eval_episodes = tally.eval;
      snapshot.policy = state.policy;
      snapshot.value = state.value;
      snapshot.history = state.history;
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_iter_%05d.txt", completed);
      const std::string path = join(cfg.out_dir, name);
      save_train_state(snapshot, path);
      artifacts.checkpoint_paths.push_back(path);
    };

    TrainResult trained = train_meta(spec, cfg.meta, cfg.ppo, cfg.scalarization, root.child(1),
                                     &tally, resume, checkpoint_hook);
    phase.policy = std::move(trained.policy);
    phase.value = std::move(trained.value);

    int skipped = 0;
    std::int64_t episodes_cum = 0;
    for (const MetaIterationStats& it : trained.history.iterations) {
      episodes_cum += it.episodes;
      HistoryRow row;
      row.phase = "meta";
      row.iteration = it.iteration;
      row.episodes = episodes_cum;
      row.surrogate = it.surrogate;
      row.value_loss = it.value_loss;
      row.mean_kl = it.mean_kl;
      row.skipped = it.skipped;
      phase.meta_rows.push_back(row);
      skipped += it.skipped ? 1 : 0;
    }
    if (cfg.meta.meta_iterations > 0 &&
        skipped == static_cast<int>(trained.history.iterations.size()))
      artifacts.numerical_failure = true;

    const std::string final_ckpt = join(cfg.out_dir, "checkpoint_final.txt");
    save_checkpoint(phase.policy, phase.value, final_ckpt);
    artifacts.checkpoint_paths.push_back(final_ckpt);

    phase.prefs = front_preferences(q, num_prefs);
    phase.returns.assign(num_prefs, {});
    RngStream finetune_root = root.child(2);
    RngStream eval_root = root.child(3);
    for (int i = 0; i < num_prefs; ++i) {
      auto& curve = phase.returns[i];
      curve.resize(finetune_iters + 1);
      RngStream eval_stream = eval_root.child(static_cast<std::uint64_t>(i));
      const FinetuneHook hook = [&](int k, const PolicyParams& snapshot) {
        RngStream stream = eval_stream.child(static_cast<std::uint64_t>(k));
        curve[k] = evaluate_policy(spec, snapshot, cfg.eval_episodes, gamma, stream, &tally);
      };
      finetune(phase.policy, phase.value, spec, phase.prefs[i], finetune_iters, cfg.ppo,
               cfg.scalarization, finetune_root.child(static_cast<std::uint64_t>(i)), &tally,
               hook);
    }
    meta_result = std::move(phase);
  }

  // ---- radial baseline, budget-matched in `both` mode ----
  int ra_iterations = 0;
  if (do_ra) {
    ra_iterations = derive_ra_iterations(cfg);
    ra_weights = front_preferences(q, num_prefs);
    const RaHook ra_hook = [&](int w, int it, const UpdateStats& stats) {
      HistoryRow row;
      row.phase = "ra";
      row.policy_id = w;
      row.iteration = it;
      row.episodes = tally.train;
      row.surrogate = stats.surrogate;
      row.value_loss = stats.value_loss;
      row.mean_kl = stats.mean_kl;
      ra_rows.push_back(row);
    };
    ra_policies = run_ra(spec, ra_weights, ra_iterations, cfg.ppo, cfg.scalarization,
                         root.child(4), &tally, &ra_failed, ra_hook);
  }

  ParetoArchive ra_archive;
  if (do_ra) {
    ra_archive = build_front(spec, ra_policies, ra_weights, gamma, cfg.eval_episodes,
                             root.child(5), &tally);
    bool all_failed = !ra_failed.empty();
    for (bool f : ra_failed) all_failed = all_failed && f;
    if (all_failed) artifacts.numerical_failure = true;
  }

  // ---- shared reference point over every valid evaluation in the run ----
  std::vector<Eigen::VectorXd> all_valid;
  if (meta_result)
    for (const auto& curve : meta_result->returns)
      for (const auto& ret : curve)
        if (is_valid(spec, ret)) all_valid.push_back(ret);
  if (do_ra)
    for (const auto& e : ra_archive.entries)
      if (e.valid) all_valid.push_back(e.mean_return);
  Eigen::VectorXd ref;
  if (!all_valid.empty()) ref = reference_point(all_valid, 1e-6);

  // ---- history assembly: meta rows, fine-tune hypervolume curve, ra rows ----
  ParetoArchive meta_archive;
  if (meta_result) {
    for (const auto& row : meta_result->meta_rows) history.push_back(row);

    const std::int64_t meta_train_eps = meta_training_episodes(cfg.meta, cfg.ppo);
    std::vector<Eigen::VectorXd> accumulated;
    for (int k = 0; k <= finetune_iters; ++k) {
      std::vector<Eigen::VectorXd> front_k;
      for (int i = 0; i < num_prefs; ++i) {
        const Eigen::VectorXd& ret = meta_result->returns[i][k];
        if (is_valid(spec, ret)) {
          front_k.push_back(ret);
          accumulated.push_back(ret);
        }
      }
      HistoryRow row;
      row.phase = "finetune";
      row.iteration = k;
      row.episodes = meta_train_eps +
                     static_cast<std::int64_t>(k) * num_prefs * cfg.ppo.episodes_per_iteration;
      row.has_hypervolume = true;
      row.hv_front = safe_hypervolume(front_k, ref);
      row.hv_archive = safe_hypervolume(accumulated, ref);
      history.push_back(row);
    }

    for (int i = 0; i < num_prefs; ++i) {
      ParetoEntry entry;
      entry.policy_id = i;
      entry.omega = meta_result->prefs[i].weights();
      entry.mean_return = meta_result->returns[i][finetune_iters];
      entry.valid = is_valid(spec, entry.mean_return);
      meta_archive.entries.push_back(std::move(entry));
    }
    mark_non_dominated(meta_archive);
    meta_archive.reference = ref;
    meta_archive.hypervolume = safe_hypervolume(meta_archive.valid_returns(), ref);
    artifacts.meta_hypervolume = meta_archive.hypervolume;
  }
  for (const auto& row : ra_rows) history.push_back(row);
  if (do_ra) {
    ra_archive.reference = ref;
    ra_archive.hypervolume = safe_hypervolume(ra_archive.valid_returns(), ref);
    artifacts.ra_hypervolume = ra_archive.hypervolume;
  }

  // ---- write artifacts ----
  artifacts.history_path = join(cfg.out_dir, "history.csv");
  atomic_write(artifacts.history_path, history_csv(history));

  const bool both = cfg.method == Method::kBoth;
  if (meta_result) {
    const std::string front_path = join(cfg.out_dir, both ? "front_meta.csv" : "front.csv");
    atomic_write(front_path, front_csv(meta_archive));
    artifacts.front_paths.push_back(front_path);
    const std::string archive_path =
        join(cfg.out_dir, both ? "archive_meta.txt" : "archive.txt");
    atomic_write(archive_path, archive_to_text(meta_archive));
    artifacts.archive_paths.push_back(archive_path);
    const std::string svg_path = join(cfg.out_dir, both ? "front_meta.svg" : "front.svg");
    atomic_write(svg_path, front_svg(meta_archive));
    artifacts.svg_paths.push_back(svg_path);
  }
  if (do_ra) {
    const std::string front_path = join(cfg.out_dir, both ? "front_ra.csv" : "front.csv");
    atomic_write(front_path, front_csv(ra_archive));
    artifacts.front_paths.push_back(front_path);
    const std::string archive_path = join(cfg.out_dir, both ? "archive_ra.txt" : "archive.txt");
    atomic_write(archive_path, archive_to_text(ra_archive));
    artifacts.archive_paths.push_back(archive_path);
    const std::string svg_path = join(cfg.out_dir, both ? "front_ra.svg" : "front.svg");
    atomic_write(svg_path, front_svg(ra_archive));
    artifacts.svg_paths.push_back(svg_path);
  }

  if (both) {
    std::ostringstream cmp;
    cmp << "method,hypervolume,valid,non_dominated,episodes\n";
    cmp << "meta," << format_double(*meta_archive.hypervolume) << ","
        << meta_archive.valid_count() << "," << meta_archive.non_dominated_count() << ","
        << (meta_training_episodes(cfg.meta, cfg.ppo) + finetune_episodes(cfg.meta, cfg.ppo))
        << "\n";
    cmp << "ra," << format_double(*ra_archive.hypervolume) << "," << ra_archive.valid_count()
        << "," << ra_archive.non_dominated_count() << ","
        << static_cast<std::int64_t>(ra_iterations) * num_prefs * cfg.ppo.episodes_per_iteration
        << "\n";
    artifacts.comparison_path = join(cfg.out_dir, "comparison.csv");
    atomic_write(artifacts.comparison_path, cmp.str());
  }

  // ---- manifest: config echo, budgets, actual tallies, one timestamp ----
  {
    std::ostringstream mf;
    mf << "morl-manifest 1\n";
    mf << "timestamp = " << timestamp_utc() << "\n";
    mf << "code_version = morl 0.1.0\n";
    mf << config_to_text(cfg);
    if (do_ra) mf << "ra.iterations_effective = " << ra_iterations << "\n";
    mf << "budget.meta_train = " << (do_meta ? meta_training_episodes(cfg.meta, cfg.ppo) : 0)
       << "\n";
    mf << "budget.meta_finetune = " << (do_meta ? finetune_episodes(cfg.meta, cfg.ppo) : 0)
       << "\n";
    mf << "budget.ra = "
       << (do_ra ? static_cast<std::int64_t>(ra_iterations) * num_prefs *
                       cfg.ppo.episodes_per_iteration
                 : 0)
       << "\n";
    mf << "episodes.train = " << tally.train << "\n";
    mf << "episodes.eval = " << tally.eval << "\n";
    mf << "episodes.total = " << tally.total() << "\n";
    if (ref.size() > 0) {
      mf << "reference_point =";
      for (int i = 0; i < ref.size(); ++i) mf << " " << format_double(ref[i]);
      mf << "\n";
    }
    artifacts.manifest_path = join(cfg.out_dir, "manifest.txt");
    atomic_write(artifacts.manifest_path, mf.str());
  }

  artifacts.tally = tally;
  return artifacts;
}

}  // namespace morl::harness
