#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "idsr/dataset_io.hpp"
#include "idsr/trainer.hpp"

namespace idsr {

constexpr const char* kCodeVersion = "idsr 0.1.0";

struct ModelMetrics {
  std::string name;           // row label ("pop", "gru", "idsr l=0.5", ...)
  std::vector<EvalRow> rows;  // one per cutoff, ascending K
};

namespace detail {

inline std::string fmt_short(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

inline std::vector<int> cutoff_set(const ModelMetrics& m) {
  std::vector<int> ks;
  for (const auto& r : m.rows) ks.push_back(r.k);
  return ks;
}

inline std::string join_ks(const std::vector<int>& ks) {
  std::string out;
  for (std::size_t i = 0; i < ks.size(); ++i)
    out += (i ? "," : "") + std::to_string(ks[i]);
  return out;
}

}  // namespace detail

// All rows must share one cutoff set; otherwise the table columns would not
// line up, which is exactly the mistake worth failing loudly on.
inline void check_same_cutoffs(const std::vector<ModelMetrics>& reports) {
  if (reports.empty()) throw ConfigError("no metric reports to combine");
  auto ks0 = detail::cutoff_set(reports.front());
  for (const auto& m : reports) {
    auto ks = detail::cutoff_set(m);
    if (ks != ks0)
      throw Error("'" + m.name + "' was evaluated at K=" +
                  detail::join_ks(ks) + " but '" + reports.front().name +
                  "' at K=" + detail::join_ks(ks0));
  }
}

// machine round-trippable: model TAB recall@K TAB mrr@K TAB ild@K ...
inline std::string metrics_to_tsv(const std::vector<ModelMetrics>& reports) {
  check_same_cutoffs(reports);
  std::ostringstream out;
  out << "model";
  for (const auto& r : reports.front().rows)
    out << "\trecall@" << r.k << "\tmrr@" << r.k << "\tild@" << r.k;
  out << "\n";
  for (const auto& m : reports) {
    out << m.name;
    for (const auto& r : m.rows)
      out << "\t" << detail::fmt_short(r.recall) << "\t"
          << detail::fmt_short(r.mrr) << "\t" << detail::fmt_short(r.ild);
    out << "\n";
  }
  return out.str();
}

inline std::vector<ModelMetrics> parse_metrics_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty metrics table");
  std::vector<std::string> head = detail::split(line, "\t");
  if (head.empty() || head[0] != "model" || (head.size() - 1) % 3 != 0)
    throw DataError("malformed metrics table header: '" + line + "'");
  std::vector<int> ks;
  for (std::size_t c = 1; c < head.size(); c += 3) {
    auto at = head[c].find('@');
    if (at == std::string::npos || head[c].substr(0, at) != "recall")
      throw DataError("unexpected metrics column '" + head[c] + "'");
    ks.push_back(static_cast<int>(
        detail::parse_ll(head[c].substr(at + 1), "metrics header")));
  }
  std::vector<ModelMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = detail::split(line, "\t");
    if (cells.size() != 1 + ks.size() * 3)
      throw DataError("metrics row has " + std::to_string(cells.size()) +
                      " cells, expected " + std::to_string(1 + ks.size() * 3));
    ModelMetrics m;
    m.name = cells[0];
    for (std::size_t j = 0; j < ks.size(); ++j) {
      auto num = [&](std::size_t c) {
        double x = 0;
        auto [e, ec] =
            std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), x);
        if (ec != std::errc() || e != cells[c].data() + cells[c].size())
          throw DataError("bad number '" + cells[c] + "' in metrics table");
        return x;
      };
      EvalRow r;
      r.k = ks[j];
      r.recall = num(1 + j * 3);
      r.mrr = num(2 + j * 3);
      r.ild = num(3 + j * 3);
      m.rows.push_back(r);
    }
    out.push_back(std::move(m));
  }
  if (out.empty()) throw DataError("metrics table has no data rows");
  return out;
}

// aligned comparison table; the best value in each column is starred
inline std::string render_comparison(const std::vector<ModelMetrics>& reports) {
  check_same_cutoffs(reports);
  std::size_t n_cols = reports.front().rows.size() * 3;
  std::vector<double> best(n_cols, -1e300);
  auto cell_value = [&](const ModelMetrics& m, std::size_t c) {
    const EvalRow& r = m.rows[c / 3];
    return c % 3 == 0 ? r.recall : (c % 3 == 1 ? r.mrr : r.ild);
  };
  for (const auto& m : reports)
    for (std::size_t c = 0; c < n_cols; ++c)
      best[c] = std::max(best[c], cell_value(m, c));

  std::size_t name_w = 5;
  for (const auto& m : reports) name_w = std::max(name_w, m.name.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_w + 2)) << "model";
  for (const auto& r : reports.front().rows)
    for (const char* metric : {"recall", "mrr", "ild"}) {
      std::string h = std::string(metric) + "@" + std::to_string(r.k);
      out << std::right << std::setw(12) << h;
    }
  out << "\n";
  for (const auto& m : reports) {
    out << std::left << std::setw(static_cast<int>(name_w + 2)) << m.name;
    for (std::size_t c = 0; c < n_cols; ++c) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f%s", cell_value(m, c),
                    cell_value(m, c) == best[c] ? "*" : " ");
      out << std::right << std::setw(12) << buf;
    }
    out << "\n";
  }
  return out.str();
}

// Minimal hand-rolled SVG line chart: one series, round markers, tick labels
// at the extremes. Enough to eyeball a trade-off curve without tooling.
inline std::string line_plot_svg(const std::string& title,
                                 const std::string& xlabel,
                                 const std::string& ylabel,
                                 const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) throw ConfigError("a line plot needs at least 2 points");
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = pts[0].first, xmax = pts[0].first;
  double ymin = pts[0].second, ymax = pts[0].second;
  for (const auto& [x, y] : pts) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + (ymin == 0 ? 1 : std::abs(ymin) * 0.1);
  auto sx = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr);
  };
  auto sy = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return std::string(buf);
  };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << " "
    << H << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" "
    << "font-size=\"16\">" << title << "</text>\n";
  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
    << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  s << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (mt + H - mb) / 2 << ")\">" << ylabel << "</text>\n";
  // extreme ticks
  s << "<text x=\"" << ml << "\" y=\"" << H - mb + 18
    << "\" text-anchor=\"middle\">" << f(xmin) << "</text>\n";
  s << "<text x=\"" << W - mr << "\" y=\"" << H - mb + 18
    << "\" text-anchor=\"middle\">" << f(xmax) << "</text>\n";
  s << "<text x=\"" << ml - 6 << "\" y=\"" << H - mb + 4
    << "\" text-anchor=\"end\">" << f(ymin) << "</text>\n";
  s << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 4
    << "\" text-anchor=\"end\">" << f(ymax) << "</text>\n";
  // series
  s << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\" points=\"";
  for (const auto& [x, y] : pts) s << sx(x) << "," << sy(y) << " ";
  s << "\"/>\n";
  for (const auto& [x, y] : pts)
    s << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y)
      << "\" r=\"3.5\" fill=\"#1f6fb2\"/>\n";
  s << "</svg>\n";
  return s.str();
}

// What it takes to reproduce a run: inputs, settings, and what came out.
struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_text;
  std::string dataset_checksum;
  std::string code_version = kCodeVersion;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> artifacts;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["run_id"] = run_id;
    j["command"] = command;
    j["config"] = config_text;
    j["dataset_checksum"] = dataset_checksum;
    j["code_version"] = code_version;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["artifacts"] = artifacts;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
      m.run_id = j.at("run_id").get<std::string>();
      m.command = j.at("command").get<std::string>();
      m.config_text = j.at("config").get<std::string>();
      m.dataset_checksum = j.at("dataset_checksum").get<std::string>();
      m.code_version = j.at("code_version").get<std::string>();
      m.started_at = j.at("started_at").get<std::string>();
      m.finished_at = j.at("finished_at").get<std::string>();
      m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad run manifest: " + std::string(e.what()));
    }
    return m;
  }

  void save(const std::filesystem::path& path) const {
    write_file(path, to_json().dump(2) + "\n");
  }

  static RunManifest load(const std::filesystem::path& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad run manifest " + path.string() + ": " + e.what());
    }
  }
};

inline std::string now_iso8601() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// content-derived id: same config + dataset -> same run id
inline std::string derive_run_id(const std::string& command,
                                 const std::string& config_text,
                                 const std::string& dataset_checksum) {
  return fnv1a64_hex(command + "\x1f" + config_text + "\x1f" +
                     dataset_checksum);
}

}  // namespace idsr
