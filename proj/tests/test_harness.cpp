#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <string>

#include "morl/errors.hpp"
#include "morl/harness/artifacts.hpp"
#include "morl/harness/checkpoint.hpp"
#include "morl/harness/config.hpp"
#include "morl/harness/experiment.hpp"
#include "morl/harness/text.hpp"
#include "morl/nnet.hpp"
#include "morl/rng.hpp"

using namespace morl;
using namespace morl::harness;

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "morl_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("format_double round-trips doubles exactly") {
  RngStream rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double x = std::ldexp(rng.normal(), static_cast<int>(rng.uniform_int(80)) - 40);
    CHECK(parse_double_exact(format_double(x)) == x);
  }
  CHECK(parse_double_exact("0.5") == 0.5);
  CHECK_THROWS_AS(parse_double_exact("12x"), InvalidInput);
  CHECK_THROWS_AS(parse_double_exact(""), InvalidInput);
}

TEST_CASE("config: defaults, parsing, unknown keys, type errors") {
  const auto cfg = parse_config_text(
      "# comment line\n"
      "env = point_reacher\n"
      "seed = 12345\n"
      "method = both\n"
      "meta.iterations = 7   # trailing comment\n"
      "ppo.policy_learn_rate = 1e-2\n"
      "scalarization.p = inf\n");
  CHECK(*cfg.env == EnvId::kPointReacher);
  CHECK(*cfg.seed == 12345);
  CHECK(cfg.method == Method::kBoth);
  CHECK(cfg.meta.meta_iterations == 7);
  CHECK(cfg.ppo.policy_learn_rate == 1e-2);
  CHECK(std::isinf(cfg.scalarization.exponent));
  CHECK(cfg.meta.num_tasks == 5);         // untouched default
  CHECK(cfg.ppo.clip_epsilon == 0.2);     // untouched default

  SUBCASE("unknown keys are hard errors listing every offender") {
    try {
      parse_config_text("env = convex_bandit\nmeta.iteratoins = 5\nppo.lr = 1\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(e.offending_keys().size() == 2);
      CHECK(e.offending_keys()[0].find("meta.iteratoins") != std::string::npos);
      CHECK(e.offending_keys()[1].find("ppo.lr") != std::string::npos);
    }
  }

  SUBCASE("bad values are reported with their key") {
    try {
      parse_config_text("seed = banana\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(e.offending_keys().size() == 1);
      CHECK(e.offending_keys()[0].find("seed") != std::string::npos);
    }
  }
}

TEST_CASE("config validation: seed is required, ranges are enforced") {
  ExperimentConfig cfg = parse_config_text("env = convex_bandit\n");
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.seed = 1;
  CHECK_NOTHROW(validate(cfg));
  cfg.ppo.clip_epsilon = 1.5;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("config: gamma defaults to the environment and can be overridden") {
  ExperimentConfig cfg = parse_config_text("env = point_reacher\nseed = 1\n");
  CHECK(cfg.env_spec().gamma == 0.99);
  cfg = parse_config_text("env = point_reacher\nseed = 1\ngamma = 0.5\n");
  CHECK(cfg.env_spec().gamma == 0.5);
  cfg = parse_config_text("env = convex_bandit\nseed = 1\n");
  CHECK(cfg.env_spec().gamma == 1.0);
}

TEST_CASE("checkpoint: bit-exact round-trip of policy and value parameters") {
  RngStream rng(7);
  RngStream pinit = rng.child(0);
  RngStream vinit = rng.child(1);
  const PolicyParams policy = make_policy(6, 2, {32, 32}, Activation::kTanh, pinit);
  const ValueParams value = make_value(6, 3, {16}, Activation::kRelu, vinit);

  const fs::path dir = temp_dir("ckpt");
  const std::string path = (dir / "params.txt").string();
  save_checkpoint(policy, value, path);
  const auto [p2, v2] = load_checkpoint(path);

  for (std::size_t l = 0; l < policy.mlp.weights.size(); ++l) {
    CHECK(policy.mlp.weights[l] == p2.mlp.weights[l]);
    CHECK(policy.mlp.biases[l] == p2.mlp.biases[l]);
  }
  CHECK(policy.log_std == p2.log_std);
  CHECK(value.mlp.weights[0] == v2.mlp.weights[0]);

  // bit-identical evaluation on random states
  RngStream draw = rng.child(2);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd s(6);
    for (int d = 0; d < 6; ++d) s[d] = draw.normal();
    CHECK(mlp_forward(policy.mlp, s) == mlp_forward(p2.mlp, s));
  }
}

TEST_CASE("checkpoint: truncation and version mismatch refuse to load") {
  RngStream rng(8);
  const PolicyParams policy = make_policy(2, 1, {4}, Activation::kTanh, rng);
  const ValueParams value = make_value(2, 2, {4}, Activation::kTanh, rng);
  const fs::path dir = temp_dir("ckpt_bad");
  const std::string path = (dir / "params.txt").string();
  save_checkpoint(policy, value, path);

  const std::string full = read_file(path);
  const std::string truncated_path = (dir / "truncated.txt").string();
  atomic_write(truncated_path, full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated_path), CheckpointError);

  const std::string versioned_path = (dir / "versioned.txt").string();
  atomic_write(versioned_path, "morl-checkpoint 999\n" + full.substr(full.find('\n') + 1));
  CHECK_THROWS_AS(load_checkpoint(versioned_path), CheckpointError);

  CHECK_THROWS_AS(load_checkpoint((dir / "missing.txt").string()), CheckpointError);
}

TEST_CASE("train state round-trips including history and tallies") {
  RngStream rng(9);
  TrainState state;
  state.iteration = 12;
  state.train_episodes = 3456;
  state.eval_episodes = 78;
  state.policy = make_policy(1, 1, {8}, Activation::kTanh, rng);
  state.value = make_value(1, 2, {8}, Activation::kTanh, rng);
  MetaIterationStats row;
  row.iteration = 11;
  row.surrogate = 0.125;
  row.value_loss = 2.5;
  row.mean_kl = 1e-3;
  row.skipped = true;
  row.episodes = 96;
  state.history.iterations.push_back(row);

  const fs::path dir = temp_dir("trainstate");
  const std::string path = (dir / "state.txt").string();
  save_train_state(state, path);
  const TrainState loaded = load_train_state(path);
  CHECK(loaded.iteration == 12);
  CHECK(loaded.train_episodes == 3456);
  CHECK(loaded.eval_episodes == 78);
  REQUIRE(loaded.history.iterations.size() == 1);
  CHECK(loaded.history.iterations[0].surrogate == 0.125);
  CHECK(loaded.history.iterations[0].skipped);
  CHECK(loaded.policy.log_std == state.policy.log_std);
}

TEST_CASE("front csv: header-only when empty, exact reload otherwise") {
  ParetoArchive empty;
  CHECK(front_csv(empty) == "policy_id,valid,non_dominated\n");

  ParetoArchive archive;
  RngStream rng(10);
  for (int i = 0; i < 2; ++i) {
    ParetoEntry e;
    e.policy_id = 1 - i;  // reversed ids: writer must sort
    e.omega = Eigen::VectorXd::NullaryExpr(2, [&]() { return rng.uniform(); });
    e.mean_return = Eigen::VectorXd::NullaryExpr(2, [&]() { return rng.normal(); });
    e.valid = true;
    e.non_dominated = i == 0;
    archive.entries.push_back(e);
  }
  const std::string csv = front_csv(archive);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
  CHECK(csv.find("policy_id,omega_0,omega_1,ret_0,ret_1,valid,non_dominated\n") == 0);

  const ParetoArchive reloaded = parse_front_csv(csv);
  REQUIRE(reloaded.entries.size() == 2);
  CHECK(reloaded.entries[0].policy_id == 0);  // sorted
  for (const auto& e : reloaded.entries) {
    const auto& orig = archive.entries[e.policy_id == 1 ? 0 : 1];
    CHECK(e.mean_return == orig.mean_return);  // 17-digit exactness
    CHECK(e.omega == orig.omega);
  }
}

TEST_CASE("archive document round-trip") {
  ParetoArchive archive;
  RngStream rng(11);
  for (int i = 0; i < 3; ++i) {
    ParetoEntry e;
    e.policy_id = i;
    e.omega = Eigen::VectorXd::NullaryExpr(2, [&]() { return rng.uniform(); });
    e.mean_return = Eigen::VectorXd::NullaryExpr(2, [&]() { return rng.normal(); });
    e.valid = i != 1;
    archive.entries.push_back(e);
  }
  mark_non_dominated(archive);
  archive.reference = Eigen::VectorXd::Constant(2, -3.5);
  archive.hypervolume = 1.25;

  const ParetoArchive reloaded = parse_archive_text(archive_to_text(archive));
  REQUIRE(reloaded.entries.size() == 3);
  CHECK(reloaded.reference == archive.reference);
  CHECK(*reloaded.hypervolume == 1.25);
  for (int i = 0; i < 3; ++i) {
    CHECK(reloaded.entries[i].mean_return == archive.entries[i].mean_return);
    CHECK(reloaded.entries[i].valid == archive.entries[i].valid);
    CHECK(reloaded.entries[i].non_dominated == archive.entries[i].non_dominated);
  }
  CHECK_THROWS_AS(parse_archive_text("not an archive\n"), InvalidInput);
}

TEST_CASE("svg: well-formed scatter with dominance rings") {
  ParetoArchive archive;
  ParetoEntry e;
  e.policy_id = 0;
  e.omega = Eigen::VectorXd::Constant(2, 0.5);
  e.mean_return = Eigen::VectorXd::Zero(2);
  e.valid = true;
  e.non_dominated = true;
  archive.entries.push_back(e);
  const std::string svg = front_svg(archive);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("stroke=\"black\"") != std::string::npos);  // the ring marker
}

TEST_CASE("atomic_write leaves no temp file behind") {
  const fs::path dir = temp_dir("atomic");
  const std::string path = (dir / "x.txt").string();
  atomic_write(path, "hello\n");
  CHECK(read_file(path) == "hello\n");
  CHECK(!fs::exists(path + ".tmp"));
}

TEST_CASE("run_experiment: degenerate run produces a one-entry front") {
  const fs::path dir = temp_dir("degenerate");
  ExperimentConfig cfg = parse_config_text(
      "env = convex_bandit\nseed = 7\nmethod = meta\nmeta.iterations = 0\n"
      "meta.finetune_iters = 0\nmeta.preference_count = 1\neval.episodes = 2\n");
  cfg.out_dir = dir.string();
  const RunArtifacts artifacts = run_experiment(cfg);
  CHECK(fs::exists(artifacts.history_path));
  CHECK(fs::exists(artifacts.manifest_path));
  REQUIRE(artifacts.front_paths.size() == 1);
  const ParetoArchive front = parse_front_csv(read_file(artifacts.front_paths[0]));
  CHECK(front.entries.size() == 1);
  CHECK(artifacts.tally.train == 0);
}

TEST_CASE("run_experiment: invalid config throws before touching the disk") {
  ExperimentConfig cfg;  // no env, no seed
  CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("derive_ra_iterations matches the budget arithmetic") {
  ExperimentConfig cfg = parse_config_text(
      "env = convex_bandit\nseed = 1\nmeta.iterations = 10\nmeta.num_tasks = 5\n"
      "meta.batch_multiplier = 5\nmeta.preference_count = 10\nmeta.finetune_iters = 10\n"
      "ppo.episodes_per_iter = 16\n");
  // meta total = 10*(5+5)*16 + 10*10*16 = 1600 + 1600 = 3200
  // per weight budget = 3200 / (10 * 16) = 20
  CHECK(meta_training_episodes(cfg.meta, cfg.ppo) == 1600);
  CHECK(finetune_episodes(cfg.meta, cfg.ppo) == 1600);
  CHECK(derive_ra_iterations(cfg) == 20);
  cfg.ra_iterations = 55;
  CHECK(derive_ra_iterations(cfg) == 55);
}
