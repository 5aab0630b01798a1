#pragma once

// Report containers and their CSV / SVG renderings.

#include <string>
#include <vector>

#include <json.hpp>

namespace homlab {

/// Shortest round-trip-safe text for a double ("%.10g"; inf and nan spelled out).
std::string format_number(double v);

struct Table {
  Table(std::string name_, std::vector<std::string> columns_) : name(std::move(name_)), columns(std::move(columns_)) {}

  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  /// Appends a row; throws std::logic_error when its width differs from the header.
  void add(std::vector<std::string> row);
};

/// "# homlab <version>" line, header row, body; LF endings, no trailing spaces.
std::string csv_text(const Table& t);

struct Check {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=", ">=", "==", "holds"
  double threshold = 0.0;
  bool pass = false;

  static Check at_most(std::string name, double value, double threshold);
  static Check at_least(std::string name, double value, double threshold);
  static Check equals(std::string name, double value, double expected);
  static Check holds(std::string name, bool ok);
};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Plot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
  std::vector<Series> series;

  bool empty() const { return series.empty(); }
};

/// Standalone SVG line chart. Points that cannot be placed (non-finite, or
/// non-positive on a log axis) are skipped.
std::string render_svg(const Plot& p);

struct PipelineReport {
  std::string name;
  std::vector<Check> checks;
  std::vector<Table> tables;  // tables[0] is <name>.csv
  Plot plot;
  nlohmann::json details = nlohmann::json::object();
  double wall_seconds = 0.0;

  bool pass() const;
  const Check* find(const std::string& check) const;
};

}  // namespace homlab
