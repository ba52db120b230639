#include "morl/harness/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "morl/errors.hpp"
#include "morl/harness/text.hpp"

namespace morl::harness {
namespace {

constexpr const char* kParamsMagic = "morl-checkpoint 1";
constexpr const char* kStateMagic = "morl-trainstate 1";

void write_mlp(std::ostream& out, const std::string& prefix, const MlpParams& mlp) {
  out << prefix << ".layers " << mlp.layer_sizes.size();
  for (int s : mlp.layer_sizes) out << " " << s;
  out << "\n";
  out << prefix << ".activation "
      << (mlp.activation == Activation::kTanh ? "tanh" : "relu") << "\n";
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    const Eigen::MatrixXd& w = mlp.weights[l];
    out << prefix << ".w" << l << " " << w.rows() << " " << w.cols() << "\n";
    for (int r = 0; r < w.rows(); ++r) {
      for (int c = 0; c < w.cols(); ++c) {
        if (c) out << " ";
        out << format_double(w(r, c));
      }
      out << "\n";
    }
    const Eigen::VectorXd& b = mlp.biases[l];
    out << prefix << ".b" << l << " " << b.size() << "\n";
    for (int i = 0; i < b.size(); ++i) {
      if (i) out << " ";
      out << format_double(b[i]);
    }
    out << "\n";
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    return s;
  }

  void expect_header(const std::string& expected, const std::string& got) {
    if (got != expected)
      fail("format version mismatch: got '" + got + "', expected '" + expected + "'");
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw CheckpointError("checkpoint '" + path_ + "': " + why);
  }

  // "<tag> n0 n1 ..." -> numbers; checks the tag.
  std::vector<std::string> tagged_tokens(const std::string& tag) {
    std::istringstream ls(line());
    std::string got;
    ls >> got;
    if (got != tag) fail("expected section '" + tag + "', found '" + got + "'");
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    return toks;
  }

  std::vector<double> number_row(int expected_count) {
    std::istringstream ls(line());
    std::vector<double> vals;
    std::string t;
    while (ls >> t) vals.push_back(parse_double_exact(t));
    if (static_cast<int>(vals.size()) != expected_count)
      fail("row has " + std::to_string(vals.size()) + " values, expected " +
           std::to_string(expected_count));
    return vals;
  }

 private:
  std::istream& in_;
  std::string path_;
};

MlpParams read_mlp(Reader& reader, const std::string& prefix) {
  MlpParams mlp;
  auto layer_toks = reader.tagged_tokens(prefix + ".layers");
  if (layer_toks.empty()) reader.fail("missing layer count");
  const int count = std::stoi(layer_toks[0]);
  if (count < 2 || static_cast<int>(layer_toks.size()) != count + 1)
    reader.fail("corrupt layer list");
  for (int i = 0; i < count; ++i) {
    const int s = std::stoi(layer_toks[i + 1]);
    if (s <= 0) reader.fail("non-positive layer size");
    mlp.layer_sizes.push_back(s);
  }
  auto act_toks = reader.tagged_tokens(prefix + ".activation");
  if (act_toks.size() != 1) reader.fail("corrupt activation line");
  if (act_toks[0] == "tanh") mlp.activation = Activation::kTanh;
  else if (act_toks[0] == "relu") mlp.activation = Activation::kRelu;
  else reader.fail("unknown activation '" + act_toks[0] + "'");

  for (int l = 0; l + 1 < count; ++l) {
    auto wshape = reader.tagged_tokens(prefix + ".w" + std::to_string(l));
    if (wshape.size() != 2) reader.fail("corrupt weight shape");
    const int rows = std::stoi(wshape[0]);
    const int cols = std::stoi(wshape[1]);
    if (rows != mlp.layer_sizes[l + 1] || cols != mlp.layer_sizes[l])
      reader.fail("weight shape disagrees with layer sizes");
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      const std::vector<double> vals = reader.number_row(cols);
      for (int c = 0; c < cols; ++c) w(r, c) = vals[c];
    }
    mlp.weights.push_back(std::move(w));

    auto bshape = reader.tagged_tokens(prefix + ".b" + std::to_string(l));
    if (bshape.size() != 1 || std::stoi(bshape[0]) != mlp.layer_sizes[l + 1])
      reader.fail("bias shape disagrees with layer sizes");
    const std::vector<double> vals = reader.number_row(mlp.layer_sizes[l + 1]);
    mlp.biases.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
  }
  return mlp;
}

std::string params_to_text(const PolicyParams& policy, const ValueParams& value) {
  std::ostringstream out;
  out << kParamsMagic << "\n";
  write_mlp(out, "policy", policy.mlp);
  out << "policy.log_std " << policy.log_std.size() << "\n";
  for (int i = 0; i < policy.log_std.size(); ++i) {
    if (i) out << " ";
    out << format_double(policy.log_std[i]);
  }
  out << "\n";
  write_mlp(out, "value", value.mlp);
  out << "end\n";
  return out.str();
}

std::pair<PolicyParams, ValueParams> params_from_stream(std::istream& in,
                                                        const std::string& path) {
  Reader reader(in, path);
  reader.expect_header(kParamsMagic, reader.line());
  PolicyParams policy;
  policy.mlp = read_mlp(reader, "policy");
  auto ls_shape = reader.tagged_tokens("policy.log_std");
  if (ls_shape.size() != 1) reader.fail("corrupt log_std shape");
  const int n = std::stoi(ls_shape[0]);
  if (n != policy.mlp.output_dim()) reader.fail("log_std length disagrees with policy output");
  const std::vector<double> vals = reader.number_row(n);
  policy.log_std = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
  ValueParams value;
  value.mlp = read_mlp(reader, "value");
  auto end_toks = reader.tagged_tokens("end");
  if (!end_toks.empty()) reader.fail("trailing tokens after end marker");
  return {std::move(policy), std::move(value)};
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write to " + tmp.string());
    out << content;
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

void save_checkpoint(const PolicyParams& policy, const ValueParams& value,
                     const std::string& path) {
  atomic_write(path, params_to_text(policy, value));
}

std::pair<PolicyParams, ValueParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  try {
    return params_from_stream(in, path);
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
}

void save_train_state(const TrainState& state, const std::string& path) {
  std::ostringstream out;
  out << kStateMagic << "\n";
  out << "iteration " << state.iteration << "\n";
  out << "episodes_train " << state.train_episodes << "\n";
  out << "episodes_eval " << state.eval_episodes << "\n";
  out << "history " << state.history.iterations.size() << "\n";
  for (const MetaIterationStats& row : state.history.iterations) {
    out << row.iteration << " " << format_double(row.surrogate) << " "
        << format_double(row.value_loss) << " " << format_double(row.mean_kl) << " "
        << (row.skipped ? 1 : 0) << " " << row.episodes << "\n";
  }
  out << params_to_text(state.policy, state.value);
  atomic_write(path, out.str());
}

TrainState load_train_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  try {
    Reader reader(in, path);
    reader.expect_header(kStateMagic, reader.line());
    TrainState state;
    auto it_toks = reader.tagged_tokens("iteration");
    if (it_toks.size() != 1) reader.fail("corrupt iteration line");
    state.iteration = std::stoi(it_toks[0]);
    auto tr_toks = reader.tagged_tokens("episodes_train");
    if (tr_toks.size() != 1) reader.fail("corrupt episodes_train line");
    state.train_episodes = std::stoll(tr_toks[0]);
    auto ev_toks = reader.tagged_tokens("episodes_eval");
    if (ev_toks.size() != 1) reader.fail("corrupt episodes_eval line");
    state.eval_episodes = std::stoll(ev_toks[0]);
    auto hist_toks = reader.tagged_tokens("history");
    if (hist_toks.size() != 1) reader.fail("corrupt history count");
    const int rows = std::stoi(hist_toks[0]);
    for (int i = 0; i < rows; ++i) {
      std::istringstream ls(reader.line());
      MetaIterationStats row;
      std::string surrogate, value_loss, mean_kl;
      int skipped = 0;
      if (!(ls >> row.iteration >> surrogate >> value_loss >> mean_kl >> skipped >> row.episodes))
        reader.fail("corrupt history row");
      row.surrogate = parse_double_exact(surrogate);
      row.value_loss = parse_double_exact(value_loss);
      row.mean_kl = parse_double_exact(mean_kl);
      row.skipped = skipped != 0;
      state.history.iterations.push_back(row);
    }
    std::tie(state.policy, state.value) = params_from_stream(in, path);
    return state;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace morl::harness
