// morl: meta-learned multi-objective reinforcement learning at desk scale.
//
// Subcommands: run (full experiment), train-meta, finetune, run-ra, eval,
// pareto, hypervolume. Exit codes: 0 success, 2 configuration error,
// 3 numerical abort that emptied a whole phase.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "morl/errors.hpp"
#include "morl/harness/artifacts.hpp"
#include "morl/harness/checkpoint.hpp"
#include "morl/harness/config.hpp"
#include "morl/harness/experiment.hpp"
#include "morl/harness/text.hpp"
#include "morl/meta.hpp"

namespace {

using namespace morl;
using namespace morl::harness;

struct GlobalArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string env_name;
};

ExperimentConfig load_config(const GlobalArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = parse_config_file(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (!args.env_name.empty()) cfg.env = env_id_from_string(args.env_name);
  return cfg;
}

void add_global_flags(CLI::App* cmd, GlobalArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (key = value lines)");
  cmd->add_option("--seed", args.seed, "Root RNG seed (overrides the config)");
  cmd->add_option("--out", args.out_dir, "Output directory (overrides the config)");
  cmd->add_option("--env", args.env_name, "Environment id (overrides the config)");
}

Eigen::VectorXd parse_vector_arg(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(parse_double_exact(item));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
}

int finish_run(const RunArtifacts& artifacts) {
  std::cout << "out: " << artifacts.out_dir << "\n";
  std::cout << "history: " << artifacts.history_path << "\n";
  for (const auto& f : artifacts.front_paths) std::cout << "front: " << f << "\n";
  if (artifacts.meta_hypervolume)
    std::cout << "meta hypervolume: " << format_double(*artifacts.meta_hypervolume) << "\n";
  if (artifacts.ra_hypervolume)
    std::cout << "ra hypervolume: " << format_double(*artifacts.ra_hypervolume) << "\n";
  std::cout << "episodes: train=" << artifacts.tally.train << " eval=" << artifacts.tally.eval
            << "\n";
  if (artifacts.numerical_failure) {
    std::cerr << "numerical abort exhausted a phase; see history.csv\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning for multi-objective reinforcement learning"};
  app.require_subcommand(1);

  GlobalArgs run_args, train_args, finetune_args, ra_args, eval_args;

  auto* cmd_run = app.add_subcommand("run", "Full experiment per the configured method");
  add_global_flags(cmd_run, run_args);
  std::string run_resume;
  cmd_run->add_option("--resume", run_resume, "Resume meta-training from a state checkpoint");

  auto* cmd_train = app.add_subcommand("train-meta", "Meta-training only; writes checkpoints");
  add_global_flags(cmd_train, train_args);
  std::string train_resume;
  cmd_train->add_option("--resume", train_resume, "Resume from a state checkpoint");

  auto* cmd_finetune =
      app.add_subcommand("finetune", "Fine-tune a checkpointed policy for one preference");
  add_global_flags(cmd_finetune, finetune_args);
  std::string ft_checkpoint, ft_omega;
  cmd_finetune->add_option("--checkpoint", ft_checkpoint, "Parameter checkpoint to start from")
      ->required();
  cmd_finetune->add_option("--omega", ft_omega, "Preference weights, comma separated")
      ->required();

  auto* cmd_ra = app.add_subcommand("run-ra", "Radial baseline only");
  add_global_flags(cmd_ra, ra_args);

  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpointed policy");
  add_global_flags(cmd_eval, eval_args);
  std::string eval_checkpoint;
  int eval_episodes_flag = 0;
  cmd_eval->add_option("--checkpoint", eval_checkpoint, "Parameter checkpoint")->required();
  cmd_eval->add_option("--episodes", eval_episodes_flag, "Evaluation episodes");

  auto* cmd_pareto = app.add_subcommand("pareto", "Analyze an archive document");
  std::string pareto_archive, pareto_out;
  cmd_pareto->add_option("--archive", pareto_archive, "Archive document path")->required();
  cmd_pareto->add_option("--out", pareto_out, "Directory for the front CSV");

  auto* cmd_hv = app.add_subcommand("hypervolume", "Exact hypervolume of a points file");
  std::string hv_points, hv_ref;
  cmd_hv->add_option("--points", hv_points, "CSV/whitespace numeric rows, one point per line")
      ->required();
  cmd_hv->add_option("--ref", hv_ref,
                     "Reference point, comma separated (default: min - 1e-6)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed() || cmd_train->parsed() || cmd_ra->parsed()) {
      GlobalArgs& args = cmd_run->parsed() ? run_args
                         : cmd_train->parsed() ? train_args
                                               : ra_args;
      ExperimentConfig cfg = load_config(args);
      if (cmd_train->parsed()) {
        cfg.method = Method::kMeta;
        cfg.meta.finetune_iterations = 0;  // training only
        cfg.resume_path = train_resume;
      } else if (cmd_ra->parsed()) {
        cfg.method = Method::kRa;
      } else {
        cfg.resume_path = run_resume;
      }
      return finish_run(run_experiment(cfg));
    }

    if (cmd_finetune->parsed()) {
      ExperimentConfig cfg = load_config(finetune_args);
      validate(cfg);
      const EnvSpec spec = cfg.env_spec();
      auto [policy, value] = load_checkpoint(ft_checkpoint);
      const PreferenceVector omega = PreferenceVector::from_weights(parse_vector_arg(ft_omega));
      EpisodeTally tally;
      RngStream rng(*cfg.seed);
      PolicyParams tuned =
          finetune(policy, value, spec, omega, cfg.meta.finetune_iterations, cfg.ppo,
                   cfg.scalarization, rng.child(2), &tally);
      std::filesystem::create_directories(cfg.out_dir);
      const std::string out_path =
          (std::filesystem::path(cfg.out_dir) / "finetuned.txt").string();
      save_checkpoint(tuned, value, out_path);
      const Eigen::VectorXd ret =
          evaluate_policy(spec, tuned, cfg.eval_episodes, spec.gamma, rng.child(3), &tally);
      std::cout << "finetuned: " << out_path << "\nreturn:";
      for (int i = 0; i < ret.size(); ++i) std::cout << " " << format_double(ret[i]);
      std::cout << "\nepisodes: train=" << tally.train << " eval=" << tally.eval << "\n";
      return 0;
    }

    if (cmd_eval->parsed()) {
      ExperimentConfig cfg = load_config(eval_args);
      validate(cfg);
      const EnvSpec spec = cfg.env_spec();
      auto [policy, value] = load_checkpoint(eval_checkpoint);
      const int episodes = eval_episodes_flag > 0 ? eval_episodes_flag : cfg.eval_episodes;
      RngStream rng(*cfg.seed);
      const Eigen::VectorXd ret =
          evaluate_policy(spec, policy, episodes, spec.gamma, rng.child(3));
      std::cout << "return:";
      for (int i = 0; i < ret.size(); ++i) std::cout << " " << format_double(ret[i]);
      std::cout << "\nvalid: " << (is_valid(spec, ret) ? 1 : 0) << "\n";
      return 0;
    }

    if (cmd_pareto->parsed()) {
      ParetoArchive archive = load_archive(pareto_archive);
      mark_non_dominated(archive);
      if (archive.reference.size() == 0 && !archive.valid_returns().empty())
        archive.reference = reference_point(archive.valid_returns(), 1e-6);
      if (archive.reference.size() > 0)
        archive.hypervolume = hypervolume(archive.valid_returns(), archive.reference);
      std::cout << "entries: " << archive.entries.size() << "\n";
      std::cout << "valid: " << archive.valid_count() << "\n";
      std::cout << "non_dominated: " << archive.non_dominated_count() << "\n";
      if (archive.hypervolume)
        std::cout << "hypervolume: " << format_double(*archive.hypervolume) << "\n";
      if (!pareto_out.empty()) {
        std::filesystem::create_directories(pareto_out);
        const std::string path = (std::filesystem::path(pareto_out) / "front.csv").string();
        atomic_write(path, front_csv(archive));
        std::cout << "front: " << path << "\n";
      }
      return 0;
    }

    if (cmd_hv->parsed()) {
      std::ifstream in(hv_points);
      if (!in) throw InvalidInput("cannot open points file: " + hv_points);
      std::vector<Eigen::VectorXd> points;
      std::string line;
      while (std::getline(in, line)) {
        for (char& c : line)
          if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> vals;
        std::string tok;
        while (ls >> tok) vals.push_back(parse_double_exact(tok));
        if (vals.empty()) continue;
        points.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size())));
      }
      if (points.empty()) throw InvalidInput("points file has no rows");
      const Eigen::VectorXd ref =
          hv_ref.empty() ? reference_point(points, 1e-6) : parse_vector_arg(hv_ref);
      std::cout << "hypervolume: " << format_double(hypervolume(points, ref)) << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
