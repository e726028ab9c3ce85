#pragma once

// Per-epoch run metrics and their CSV form.
//
// Schema v1: optional `# key=value` header comments, then the column line
//   epoch,effective_passes,objective,gap,wall_seconds,updates,max_delay
// followed by one row per completed epoch.

#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "asysvrg/libsvm.hpp"

namespace asysvrg {

inline constexpr const char* kMetricsSchema = "asysvrg-metrics/1";
inline constexpr const char* kMetricsColumns = "epoch,effective_passes,objective,gap,wall_seconds,updates,max_delay";

struct EpochRow {
  std::size_t epoch = 0;
  double effective_passes = 0.0;
  double objective = 0.0;
  double gap = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t updates = 0;
  std::uint64_t max_delay = 0;

  bool operator==(const EpochRow&) const = default;
};

struct RunMetrics {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<EpochRow> rows;
};

inline void write_metrics_row(std::ostream& out, const EpochRow& r) {
  out << r.epoch << ',' << detail::format_real(r.effective_passes) << ',' << detail::format_real(r.objective) << ','
      << detail::format_real(r.gap) << ',' << detail::format_real(r.wall_seconds) << ',' << r.updates << ','
      << r.max_delay << '\n';
}

inline void write_metrics_header(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& header) {
  out << "# schema=" << kMetricsSchema << '\n';
  for (const auto& [k, v] : header) out << "# " << k << '=' << v << '\n';
  out << kMetricsColumns << '\n';
}

inline void write_metrics_csv(std::ostream& out, const RunMetrics& m) {
  write_metrics_header(out, m.header);
  for (const auto& r : m.rows) write_metrics_row(out, r);
}

namespace detail {

// Metric cells may legitimately hold nan (no reference) or inf (diverged).
inline double parse_metric(const std::string& cell, std::size_t line_no) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (cell == "inf") return std::numeric_limits<double>::infinity();
  if (cell == "-inf") return -std::numeric_limits<double>::infinity();
  return parse_real(cell, line_no);
}

}  // namespace detail

inline EpochRow parse_metrics_row(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 7) throw ParseError(line_no, "expected 7 columns, got " + std::to_string(cells.size()));
  try {
    EpochRow r;
    r.epoch = std::stoull(cells[0]);
    r.effective_passes = detail::parse_metric(cells[1], line_no);
    r.objective = detail::parse_metric(cells[2], line_no);
    r.gap = detail::parse_metric(cells[3], line_no);
    r.wall_seconds = detail::parse_metric(cells[4], line_no);
    r.updates = std::stoull(cells[5]);
    r.max_delay = std::stoull(cells[6]);
    return r;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(line_no, e.what());
  }
}

inline RunMetrics read_metrics_csv(std::istream& in) {
  RunMetrics m;
  std::string line;
  std::size_t line_no = 0;
  bool seen_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = line.substr(line.find_first_not_of("# "));
      const auto eq = body.find('=');
      if (eq != std::string::npos && body.substr(0, eq) != "schema")
        m.header.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (!seen_columns) {
      if (line != kMetricsColumns) throw ParseError(line_no, "unexpected column header '" + line + "'");
      seen_columns = true;
      continue;
    }
    m.rows.push_back(parse_metrics_row(line, line_no));
  }
  if (!seen_columns) throw ParseError(line_no, "missing column header");
  return m;
}

}  // namespace asysvrg
