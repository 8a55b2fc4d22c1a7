#pragma once

// Output files: CSV with 17 significant digits, JSON summaries, all written
// to a temporary sibling and renamed into place.

#include "advest/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace advest {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

/// RFC 4180 quoting: fields containing a comma, quote or line break are quoted.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row_strings(header); }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::invalid_argument("CsvWriter: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_field(cells[i]);
    }
    out_ << "\r\n";
  }

  void row(const std::vector<double>& values, const std::vector<std::string>& prefix = {}) {
    std::vector<std::string> cells = prefix;
    for (double v : values) cells.push_back(format_double(v));
    row_strings(cells);
  }

  [[nodiscard]] std::string str() const { return out_.str(); }

 private:
  std::size_t width_;
  std::ostringstream out_;
};

/// Minimal RFC 4180 reader (used by tests and tools).
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(cell);
      cell.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(cell);
      rows.push_back(row);
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (any || !cell.empty() || !row.empty()) {
    row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

inline std::string dataset_csv(const Dataset& d) {
  CsvWriter w(d.names());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    std::vector<double> v;
    for (Eigen::Index j = 0; j < d.d(); ++j) v.push_back(d(i, j));
    w.row(v);
  }
  return w.str();
}

/// Reads observations for `spec` from CSV; the header must name the model's
/// columns (any order, extra columns ignored).
inline Dataset read_dataset_csv(const GeneratorSpec& spec, const std::string& text) {
  const auto table = parse_csv(text);
  if (table.size() < 2) throw std::invalid_argument("data CSV: need a header and at least one row");
  const Dataset layout = make_dataset(spec, Mat::Zero(0, spec.model == ModelId::roy ? 4 : (is_conditional(spec) ? 2 : 1)));
  std::vector<std::size_t> source;
  for (const auto& name : layout.names()) {
    auto it = std::find(table[0].begin(), table[0].end(), name);
    if (it == table[0].end()) throw std::invalid_argument("data CSV: missing column " + name);
    source.push_back(static_cast<std::size_t>(it - table[0].begin()));
  }
  Mat rows(static_cast<Eigen::Index>(table.size() - 1), static_cast<Eigen::Index>(source.size()));
  for (std::size_t r = 1; r < table.size(); ++r) {
    if (table[r].size() != table[0].size()) {
      throw std::invalid_argument("data CSV: row " + std::to_string(r) + " has " + std::to_string(table[r].size()) +
                                  " fields, header has " + std::to_string(table[0].size()));
    }
    for (std::size_t j = 0; j < source.size(); ++j) {
      const std::string& cell = table[r][source[j]];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || !std::isfinite(v)) {
        throw std::invalid_argument("data CSV: row " + std::to_string(r) + " column " + layout.names()[j] +
                                    ": not a finite number: " + cell);
      }
      rows(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return layout.with_rows(std::move(rows));
}

inline std::string draws_csv(const McSummary& s, const std::string& label) {
  std::vector<std::string> header = {"estimator", "replication", "ok"};
  header.insert(header.end(), s.names.begin(), s.names.end());
  CsvWriter w(header);
  for (Eigen::Index r = 0; r < s.draws.rows(); ++r) {
    std::vector<double> v;
    for (Eigen::Index j = 0; j < s.draws.cols(); ++j) v.push_back(s.draws(r, j));
    w.row(v, {label, std::to_string(r), s.ok[static_cast<std::size_t>(r)] ? "1" : "0"});
  }
  return w.str();
}

inline std::string surface_csv(const LossSurface& s) {
  CsvWriter w({s.coordinate, "profiled", "oracle", "loglik", "supported"});
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    auto at = [&](const std::vector<double>& v) { return i < v.size() ? format_double(v[i]) : std::string(); };
    w.row_strings({format_double(s.grid[i]), at(s.profiled), at(s.oracle), at(s.loglik),
                   i < s.supported.size() ? (s.supported[i] ? "1" : "0") : ""});
  }
  return w.str();
}

inline Json summary_json(const McSummary& s) {
  using config_detail::num;
  Json coords = Json::object();
  for (std::size_t j = 0; j < s.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Histogram& h = s.histograms.at(j);
    Json hist = {{"edges", Json::array()}, {"counts", h.counts}};
    for (double e : h.edges) hist["edges"].push_back(num(e));
    coords[s.names[j]] = {{"mean", num(s.mean(jj))},
                          {"sd", num(s.sd(jj))},
                          {"sqrt_n_sd", num(s.sqrt_n_sd(jj))},
                          {"mean_se", num(s.mean_se(jj))},
                          {"histogram", hist}};
  }
  return {{"replications", s.replications()},
          {"failures", s.failures},
          {"n", s.n},
          {"coordinates", coords},
          {"failure_log", s.failure_log}};
}

inline Json bootstrap_json(const BootstrapResult& b, Eigen::Index n) {
  using config_detail::num;
  Json coords = Json::object();
  for (std::size_t j = 0; j < b.names.size(); ++j) {
    const double se = b.se(static_cast<Eigen::Index>(j));
    coords[b.names[j]] = {{"se", num(se)}, {"sqrt_n_se", num(std::sqrt(static_cast<double>(n)) * se)}};
  }
  return {{"draws", b.draws.rows()}, {"failures", b.failures}, {"coordinates", coords}, {"failure_log", b.failure_log}};
}

inline Json scorecard_json(const ExperimentResult& r) {
  using config_detail::num;
  Json card = Json::array();
  for (const auto& t : r.scorecard) {
    card.push_back({{"name", t.target.name},
                    {"statistic", to_string(t.target.stat)},
                    {"value", num(t.value)},
                    {"lower", num(t.target.lower)},
                    {"upper", num(t.target.upper)},
                    {"reference", num(t.target.reference)},
                    {"provenance", to_string(t.target.provenance)},
                    {"note", experiment_notes().count(t.target.note_key) ? experiment_notes().at(t.target.note_key) : ""},
                    {"pass", t.pass},
                    {"error", t.error}});
  }
  return card;
}

inline Json experiment_result_json(const ExperimentResult& r) {
  Json summaries = Json::object();
  for (const auto& [label, s] : r.summaries) summaries[label] = summary_json(s);
  Json boots = Json::object();
  for (const auto& [label, b] : r.bootstraps) {
    const Eigen::Index n = r.summaries.empty() ? 0 : r.summaries.begin()->second.n;
    boots[label] = bootstrap_json(b, n);
  }
  Json j = {{"experiment", r.id},
            {"seed", r.seed},
            {"replications", r.reps},
            {"reduced_power", r.reduced_power},
            {"estimators", summaries},
            {"bootstrap", boots},
            {"scorecard", scorecard_json(r)}};
  if (r.paired_gap_over_sd) j["paired_gap_over_sd"] = *r.paired_gap_over_sd;
  return j;
}

/// Human-readable scorecard, one line per target.
inline std::string scorecard_table(const ExperimentResult& r) {
  std::ostringstream s;
  s << "experiment " << r.id << " seed " << r.seed << " reps " << r.reps;
  if (r.reduced_power) s << " (reduced-power)";
  s << "\n";
  for (const auto& t : r.scorecard) {
    s << (t.pass ? "PASS " : "FAIL ") << std::left << std::setw(28) << t.target.name << " value "
      << std::setprecision(5) << t.value << " in [" << t.target.lower << ", " << t.target.upper << "]"
      << " (" << to_string(t.target.provenance) << ")";
    if (!t.error.empty()) s << " error: " << t.error;
    s << "\n";
  }
  return s.str();
}

}  // namespace advest
