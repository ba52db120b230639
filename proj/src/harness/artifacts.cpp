#include "morl/harness/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "morl/errors.hpp"
#include "morl/harness/text.hpp"

namespace morl::harness {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

std::string history_csv(const std::vector<HistoryRow>& rows) {
  std::ostringstream out;
  out << "phase,policy_id,iteration,episodes,surrogate,value_loss,mean_kl,skipped,"
         "hv_front,hv_archive\n";
  for (const HistoryRow& r : rows) {
    out << r.phase << ",";
    if (r.policy_id >= 0) out << r.policy_id;
    out << "," << r.iteration << "," << r.episodes << "," << format_double(r.surrogate) << ","
        << format_double(r.value_loss) << "," << format_double(r.mean_kl) << ","
        << (r.skipped ? 1 : 0) << ",";
    if (r.has_hypervolume)
      out << format_double(r.hv_front) << "," << format_double(r.hv_archive);
    else
      out << ",";
    out << "\n";
  }
  return out.str();
}

std::string front_csv(const ParetoArchive& archive) {
  std::vector<const ParetoEntry*> order;
  order.reserve(archive.entries.size());
  for (const auto& e : archive.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(),
            [](const ParetoEntry* a, const ParetoEntry* b) { return a->policy_id < b->policy_id; });

  const int q = order.empty() ? 0 : static_cast<int>(order.front()->mean_return.size());
  std::ostringstream out;
  out << "policy_id";
  for (int i = 0; i < q; ++i) out << ",omega_" << i;
  for (int i = 0; i < q; ++i) out << ",ret_" << i;
  out << ",valid,non_dominated\n";
  for (const ParetoEntry* e : order) {
    out << e->policy_id;
    for (int i = 0; i < q; ++i) out << "," << format_double(e->omega[i]);
    for (int i = 0; i < q; ++i) out << "," << format_double(e->mean_return[i]);
    out << "," << (e->valid ? 1 : 0) << "," << (e->non_dominated ? 1 : 0) << "\n";
  }
  return out.str();
}

ParetoArchive parse_front_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("front csv: empty file");
  const std::vector<std::string> header = split(line, ',');
  if (header.size() < 3 || header[0] != "policy_id")
    throw InvalidInput("front csv: unexpected header");
  const int q = static_cast<int>((header.size() - 3) / 2);

  ParetoArchive archive;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (static_cast<int>(f.size()) != 3 + 2 * q) throw InvalidInput("front csv: bad row");
    ParetoEntry e;
    e.policy_id = std::stoi(f[0]);
    e.omega.resize(q);
    e.mean_return.resize(q);
    for (int i = 0; i < q; ++i) e.omega[i] = parse_double_exact(f[1 + i]);
    for (int i = 0; i < q; ++i) e.mean_return[i] = parse_double_exact(f[1 + q + i]);
    e.valid = f[1 + 2 * q] == "1";
    e.non_dominated = f[2 + 2 * q] == "1";
    archive.entries.push_back(std::move(e));
  }
  return archive;
}

std::string archive_to_text(const ParetoArchive& archive) {
  std::ostringstream out;
  out << "morl-archive 1\n";
  const int q = archive.entries.empty() ? static_cast<int>(archive.reference.size())
                                        : static_cast<int>(archive.entries.front().mean_return.size());
  out << "objectives " << q << "\n";
  out << "entries " << archive.entries.size() << "\n";
  if (archive.reference.size() > 0) {
    out << "reference";
    for (int i = 0; i < archive.reference.size(); ++i)
      out << " " << format_double(archive.reference[i]);
    out << "\n";
  }
  if (archive.hypervolume) out << "hypervolume " << format_double(*archive.hypervolume) << "\n";
  for (const ParetoEntry& e : archive.entries) {
    out << "entry " << e.policy_id;
    for (int i = 0; i < e.omega.size(); ++i) out << " " << format_double(e.omega[i]);
    for (int i = 0; i < e.mean_return.size(); ++i) out << " " << format_double(e.mean_return[i]);
    out << " " << (e.valid ? 1 : 0) << " " << (e.non_dominated ? 1 : 0) << "\n";
  }
  return out.str();
}

ParetoArchive parse_archive_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "morl-archive 1")
    throw InvalidInput("archive: bad or missing format line");
  ParetoArchive archive;
  int q = -1;
  int expected_entries = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "objectives") {
      ls >> q;
    } else if (tag == "entries") {
      ls >> expected_entries;
    } else if (tag == "reference") {
      std::vector<double> vals;
      std::string t;
      while (ls >> t) vals.push_back(parse_double_exact(t));
      archive.reference = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
    } else if (tag == "hypervolume") {
      std::string t;
      ls >> t;
      archive.hypervolume = parse_double_exact(t);
    } else if (tag == "entry") {
      if (q < 1) throw InvalidInput("archive: entry before objectives line");
      ParetoEntry e;
      ls >> e.policy_id;
      e.omega.resize(q);
      e.mean_return.resize(q);
      std::string t;
      for (int i = 0; i < q; ++i) {
        if (!(ls >> t)) throw InvalidInput("archive: truncated entry");
        e.omega[i] = parse_double_exact(t);
      }
      for (int i = 0; i < q; ++i) {
        if (!(ls >> t)) throw InvalidInput("archive: truncated entry");
        e.mean_return[i] = parse_double_exact(t);
      }
      int valid = 0, nd = 0;
      if (!(ls >> valid >> nd)) throw InvalidInput("archive: truncated entry flags");
      e.valid = valid != 0;
      e.non_dominated = nd != 0;
      archive.entries.push_back(std::move(e));
    } else {
      throw InvalidInput("archive: unknown section '" + tag + "'");
    }
  }
  if (expected_entries >= 0 && expected_entries != static_cast<int>(archive.entries.size()))
    throw InvalidInput("archive: entry count mismatch");
  return archive;
}

ParetoArchive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open archive: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_archive_text(buf.str());
}

std::string front_svg(const ParetoArchive& archive) {
  const double width = 480, height = 360, pad = 48;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& e : archive.entries) {
    if (e.mean_return.size() < 2) continue;
    const double x = e.mean_return[0], y = e.mean_return[1];
    if (first) {
      x_min = x_max = x;
      y_min = y_max = y;
      first = false;
    }
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
  if (x_max - x_min < 1e-12) x_max = x_min + 1.0;
  if (y_max - y_min < 1e-12) y_max = y_min + 1.0;

  const auto sx = [&](double x) { return pad + (x - x_min) / (x_max - x_min) * (width - 2 * pad); };
  const auto sy = [&](double y) {
    return height - pad - (y - y_min) / (y_max - y_min) * (height - 2 * pad);
  };

  out << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
      << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
      << height - pad << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"11\" text-anchor=\"middle\">objective 0</text>\n";
  out << "<text x=\"14\" y=\"" << height / 2
      << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << height / 2
      << ")\">objective 1</text>\n";
  out << "<text x=\"" << pad << "\" y=\"" << height - pad + 14 << "\" font-size=\"9\">"
      << format_double(x_min) << "</text>\n";
  out << "<text x=\"" << width - pad << "\" y=\"" << height - pad + 14
      << "\" font-size=\"9\" text-anchor=\"end\">" << format_double(x_max) << "</text>\n";

  for (const auto& e : archive.entries) {
    if (e.mean_return.size() < 2) continue;
    const double cx = sx(e.mean_return[0]);
    const double cy = sy(e.mean_return[1]);
    const char* fill = e.valid ? "#2c6fbb" : "#bbbbbb";
    out << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"3.5\" fill=\"" << fill
        << "\"/>\n";
    if (e.non_dominated)
      out << "<circle cx=\"" << cx << "\" cy=\"" << cy
          << "\" r=\"6\" fill=\"none\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace morl::harness
