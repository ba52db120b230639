#include "morl/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "morl/errors.hpp"
#include "morl/harness/text.hpp"

namespace morl::harness {

Method method_from_string(std::string_view name) {
  if (name == "meta") return Method::kMeta;
  if (name == "ra") return Method::kRa;
  if (name == "both") return Method::kBoth;
  throw InvalidInput("unknown method: " + std::string(name));
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kMeta: return "meta";
    case Method::kRa: return "ra";
    case Method::kBoth: return "both";
  }
  return "unknown";
}

EnvSpec ExperimentConfig::env_spec() const {
  if (!env) throw ConfigError("environment not set", {"env"});
  EnvSpec spec = make_env_spec(*env);
  if (gamma) spec.gamma = *gamma;
  return spec;
}

namespace {

struct Line {
  std::string key;
  std::string value;
  int number = 0;
};

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  auto end = s.find_last_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  return s.substr(begin, end - begin + 1);
}

std::vector<Line> tokenize(const std::string& text, std::vector<std::string>& bad) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      bad.push_back("line " + std::to_string(number) + " (missing '=')");
      continue;
    }
    Line line;
    line.key = trim(raw.substr(0, eq));
    line.value = trim(raw.substr(eq + 1));
    line.number = number;
    if (line.key.empty()) {
      bad.push_back("line " + std::to_string(number) + " (empty key)");
      continue;
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

class Parser {
 public:
  explicit Parser(ExperimentConfig& cfg) : cfg_(cfg) {}

  void consume(const Line& line) {
    const std::string& k = line.key;
    const std::string& v = line.value;
    try {
      if (k == "env") cfg_.env = env_id_from_string(v);
      else if (k == "seed") cfg_.seed = parse_u64(v);
      else if (k == "method") cfg_.method = method_from_string(v);
      else if (k == "gamma") cfg_.gamma = parse_real(v);
      else if (k == "eval.episodes") cfg_.eval_episodes = parse_int(v);
      else if (k == "out") cfg_.out_dir = v;
      else if (k == "ra.iterations") cfg_.ra_iterations = parse_int(v);
      else if (k == "meta.iterations") cfg_.meta.meta_iterations = parse_int(v);
      else if (k == "meta.num_tasks") cfg_.meta.num_tasks = parse_int(v);
      else if (k == "meta.adaptation_steps") cfg_.meta.adaptation_steps = parse_int(v);
      else if (k == "meta.learn_rate") cfg_.meta.meta_learn_rate = parse_real(v);
      else if (k == "meta.finetune_iters") cfg_.meta.finetune_iterations = parse_int(v);
      else if (k == "meta.batch_multiplier") cfg_.meta.batch_multiplier = parse_int(v);
      else if (k == "meta.preference_count") cfg_.meta.preference_count = parse_int(v);
      else if (k == "meta.checkpoint_every") cfg_.meta.checkpoint_every = parse_int(v);
      else if (k == "ppo.loss_variant") cfg_.ppo.loss_variant = parse_variant(v);
      else if (k == "ppo.clip_epsilon") cfg_.ppo.clip_epsilon = parse_real(v);
      else if (k == "ppo.kl_beta") cfg_.ppo.kl_beta = parse_real(v);
      else if (k == "ppo.policy_learn_rate") cfg_.ppo.policy_learn_rate = parse_real(v);
      else if (k == "ppo.value_learn_rate") cfg_.ppo.value_learn_rate = parse_real(v);
      else if (k == "ppo.epochs") cfg_.ppo.epochs = parse_int(v);
      else if (k == "ppo.minibatch_size") cfg_.ppo.minibatch_size = parse_int(v);
      else if (k == "ppo.episodes_per_iter") cfg_.ppo.episodes_per_iteration = parse_int(v);
      else if (k == "scalarization.kind") cfg_.scalarization.kind = parse_kind(v);
      else if (k == "scalarization.p") cfg_.scalarization.exponent = parse_exponent(v);
      else if (k == "scalarization.utopian") cfg_.scalarization.utopian = parse_utopian(v);
      else if (k == "scalarization.margin") cfg_.scalarization.margin = parse_real(v);
      else if (k == "scalarization.z") cfg_.scalarization.fixed_utopian = parse_vector(v);
      else bad_.push_back(k + " (unknown key)");
    } catch (const std::exception&) {
      bad_.push_back(k + " (bad value: '" + v + "')");
    }
  }

  std::vector<std::string>& bad() { return bad_; }

 private:
  static std::uint64_t parse_u64(const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidInput("u64");
    return out;
  }
  static int parse_int(const std::string& v) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw InvalidInput("int");
    return out;
  }
  static double parse_real(const std::string& v) { return parse_double_exact(v); }
  static double parse_exponent(const std::string& v) {
    if (v == "inf" || v == "infinity") return std::numeric_limits<double>::infinity();
    return parse_double_exact(v);
  }
  static LossVariant parse_variant(const std::string& v) {
    if (v == "clip") return LossVariant::kClip;
    if (v == "kl_penalty") return LossVariant::kKlPenalty;
    throw InvalidInput("loss variant");
  }
  static ScalarizationKind parse_kind(const std::string& v) {
    if (v == "weighted_sum") return ScalarizationKind::kWeightedSum;
    if (v == "chebyshev") return ScalarizationKind::kChebyshev;
    throw InvalidInput("scalarization kind");
  }
  static UtopianPolicy parse_utopian(const std::string& v) {
    if (v == "batch_max_plus_margin") return UtopianPolicy::kBatchMaxPlusMargin;
    if (v == "fixed") return UtopianPolicy::kFixed;
    throw InvalidInput("utopian policy");
  }
  static Eigen::VectorXd parse_vector(const std::string& v) {
    std::vector<double> vals;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) vals.push_back(parse_double_exact(trim(item)));
    if (vals.empty()) throw InvalidInput("vector");
    return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
  }

  ExperimentConfig& cfg_;
  std::vector<std::string> bad_;
};

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> bad;
  const std::vector<Line> lines = tokenize(text, bad);
  Parser parser(cfg);
  for (const Line& line : lines) parser.consume(line);
  bad.insert(bad.end(), parser.bad().begin(), parser.bad().end());
  if (!bad.empty()) {
    std::string msg = "config rejected:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg, bad);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path, {path});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  if (cfg.env) out << "env = " << to_string(*cfg.env) << "\n";
  if (cfg.seed) out << "seed = " << *cfg.seed << "\n";
  out << "method = " << to_string(cfg.method) << "\n";
  if (cfg.gamma) out << "gamma = " << format_double(*cfg.gamma) << "\n";
  out << "eval.episodes = " << cfg.eval_episodes << "\n";
  out << "out = " << cfg.out_dir << "\n";
  out << "ra.iterations = " << cfg.ra_iterations << "\n";
  out << "meta.iterations = " << cfg.meta.meta_iterations << "\n";
  out << "meta.num_tasks = " << cfg.meta.num_tasks << "\n";
  out << "meta.adaptation_steps = " << cfg.meta.adaptation_steps << "\n";
  out << "meta.learn_rate = " << format_double(cfg.meta.meta_learn_rate) << "\n";
  out << "meta.finetune_iters = " << cfg.meta.finetune_iterations << "\n";
  out << "meta.batch_multiplier = " << cfg.meta.batch_multiplier << "\n";
  out << "meta.preference_count = " << cfg.meta.preference_count << "\n";
  out << "meta.checkpoint_every = " << cfg.meta.checkpoint_every << "\n";
  out << "ppo.loss_variant = "
      << (cfg.ppo.loss_variant == LossVariant::kClip ? "clip" : "kl_penalty") << "\n";
  out << "ppo.clip_epsilon = " << format_double(cfg.ppo.clip_epsilon) << "\n";
  out << "ppo.kl_beta = " << format_double(cfg.ppo.kl_beta) << "\n";
  out << "ppo.policy_learn_rate = " << format_double(cfg.ppo.policy_learn_rate) << "\n";
  out << "ppo.value_learn_rate = " << format_double(cfg.ppo.value_learn_rate) << "\n";
  out << "ppo.epochs = " << cfg.ppo.epochs << "\n";
  out << "ppo.minibatch_size = " << cfg.ppo.minibatch_size << "\n";
  out << "ppo.episodes_per_iter = " << cfg.ppo.episodes_per_iteration << "\n";
  out << "scalarization.kind = "
      << (cfg.scalarization.kind == ScalarizationKind::kWeightedSum ? "weighted_sum"
                                                                    : "chebyshev")
      << "\n";
  out << "scalarization.p = " << format_double(cfg.scalarization.exponent) << "\n";
  out << "scalarization.utopian = "
      << (cfg.scalarization.utopian == UtopianPolicy::kBatchMaxPlusMargin
              ? "batch_max_plus_margin"
              : "fixed")
      << "\n";
  out << "scalarization.margin = " << format_double(cfg.scalarization.margin) << "\n";
  if (cfg.scalarization.fixed_utopian.size() > 0) {
    out << "scalarization.z = ";
    for (int i = 0; i < cfg.scalarization.fixed_utopian.size(); ++i) {
      if (i) out << ",";
      out << format_double(cfg.scalarization.fixed_utopian[i]);
    }
    out << "\n";
  }
  return out.str();
}

void validate(const ExperimentConfig& cfg) {
  std::vector<std::string> bad;
  if (!cfg.env) bad.push_back("env (required)");
  if (!cfg.seed) bad.push_back("seed (required, no wall-clock default)");
  if (cfg.eval_episodes < 1) bad.push_back("eval.episodes (must be >= 1)");
  if (cfg.gamma && (*cfg.gamma < 0.0 || *cfg.gamma > 1.0)) bad.push_back("gamma (must be in [0,1])");
  if (cfg.meta.meta_iterations < 0) bad.push_back("meta.iterations (must be >= 0)");
  if (cfg.meta.num_tasks < 1) bad.push_back("meta.num_tasks (must be >= 1)");
  if (cfg.meta.adaptation_steps < 1) bad.push_back("meta.adaptation_steps (must be >= 1)");
  if (cfg.meta.meta_learn_rate < 0.0) bad.push_back("meta.learn_rate (must be >= 0)");
  if (cfg.meta.finetune_iterations < 0) bad.push_back("meta.finetune_iters (must be >= 0)");
  if (cfg.meta.batch_multiplier < 1) bad.push_back("meta.batch_multiplier (must be >= 1)");
  if (cfg.meta.preference_count < 1) bad.push_back("meta.preference_count (must be >= 1)");
  if (cfg.meta.checkpoint_every < 0) bad.push_back("meta.checkpoint_every (must be >= 0)");
  if (cfg.ppo.clip_epsilon <= 0.0 || cfg.ppo.clip_epsilon >= 1.0)
    bad.push_back("ppo.clip_epsilon (must be in (0,1))");
  if (cfg.ppo.kl_beta < 0.0) bad.push_back("ppo.kl_beta (must be >= 0)");
  if (cfg.ppo.policy_learn_rate < 0.0) bad.push_back("ppo.policy_learn_rate (must be >= 0)");
  if (cfg.ppo.value_learn_rate < 0.0) bad.push_back("ppo.value_learn_rate (must be >= 0)");
  if (cfg.ppo.epochs < 1) bad.push_back("ppo.epochs (must be >= 1)");
  if (cfg.ppo.minibatch_size < 1) bad.push_back("ppo.minibatch_size (must be >= 1)");
  if (cfg.ppo.episodes_per_iteration < 1) bad.push_back("ppo.episodes_per_iter (must be >= 1)");
  if (cfg.ra_iterations < 0) bad.push_back("ra.iterations (must be >= 0; 0 = derive)");
  if (cfg.scalarization.exponent < 1.0) bad.push_back("scalarization.p (must be >= 1)");
  if (cfg.scalarization.kind == ScalarizationKind::kChebyshev &&
      cfg.scalarization.utopian == UtopianPolicy::kFixed) {
    if (cfg.scalarization.fixed_utopian.size() == 0 ||
        !cfg.scalarization.fixed_utopian.allFinite())
      bad.push_back("scalarization.z (finite vector required for fixed utopian)");
  }
  if (cfg.scalarization.margin < 0.0) bad.push_back("scalarization.margin (must be >= 0)");
  if (!bad.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg, bad);
  }
}

int derive_ra_iterations(const ExperimentConfig& cfg) {
  if (cfg.ra_iterations > 0) return cfg.ra_iterations;
  const std::int64_t meta_total =
      meta_training_episodes(cfg.meta, cfg.ppo) + finetune_episodes(cfg.meta, cfg.ppo);
  const std::int64_t per_weight =
      static_cast<std::int64_t>(cfg.meta.preference_count) * cfg.ppo.episodes_per_iteration;
  const std::int64_t t = (meta_total + per_weight / 2) / std::max<std::int64_t>(1, per_weight);
  return static_cast<int>(std::max<std::int64_t>(1, t));
}

}  // namespace morl::harness
