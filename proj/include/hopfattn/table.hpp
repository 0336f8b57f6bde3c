#pragma once

// Metric tables: a sample_id key column followed by named numeric columns.
// CSV I/O is UTF-8 with a header row and '.' as the decimal separator. Fields
// may be double-quoted; an empty numeric cell reads as NaN.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "hopfattn/error.hpp"

namespace hopfattn {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

inline double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::MalformedTable, where + ": \"" + std::string(s) + "\" is not a number");
  }
  return v;
}

/// Splits one CSV record. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class MetricTable {
 public:
  MetricTable() = default;
  explicit MetricTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    values_.resize(columns_.size());
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (!col_index_.emplace(columns_[c], c).second) {
        throw Error(ErrorCode::MalformedTable, "duplicate column \"" + columns_[c] + "\"");
      }
    }
  }

  void add_row(std::string id, const std::vector<double>& row) {
    if (row.size() != columns_.size()) {
      throw Error(ErrorCode::MalformedTable, "row for \"" + id + "\" has " +
                                                 std::to_string(row.size()) + " values, expected " +
                                                 std::to_string(columns_.size()));
    }
    if (!id_index_.emplace(id, ids_.size()).second) {
      throw Error(ErrorCode::DuplicateId, "sample_id \"" + id + "\" appears twice");
    }
    ids_.push_back(std::move(id));
    for (std::size_t c = 0; c < row.size(); ++c) values_[c].push_back(row[c]);
  }

  std::size_t num_rows() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }

  bool has_column(const std::string& name) const { return col_index_.contains(name); }

  const std::vector<double>& column(const std::string& name) const {
    auto it = col_index_.find(name);
    if (it == col_index_.end()) {
      throw Error(ErrorCode::UnknownColumn, "no column named \"" + name + "\"");
    }
    return values_[it->second];
  }

  /// Column values, rejecting missing entries.
  const std::vector<double>& finite_column(const std::string& name) const {
    const auto& col = column(name);
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (!std::isfinite(col[r])) {
        throw Error(ErrorCode::MalformedTable,
                    "column \"" + name + "\" is missing a value for \"" + ids_[r] + "\"");
      }
    }
    return col;
  }

  std::optional<std::size_t> row_of(const std::string& id) const {
    auto it = id_index_.find(id);
    if (it == id_index_.end()) return std::nullopt;
    return it->second;
  }

  double at(std::size_t row, const std::string& name) const { return column(name)[row]; }

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> values_;  // column-major
  std::unordered_map<std::string, std::size_t> id_index_;
  std::unordered_map<std::string, std::size_t> col_index_;
};

/// Inclusive layer range for tables that carry a "layer" column.
struct LayerRange {
  double first = 0;
  double last = 0;
};

namespace detail {

struct RawTable {
  std::vector<std::string> columns;  // excludes sample_id
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
};

inline RawTable parse_raw_csv(std::istream& in, const std::string& origin) {
  RawTable t;
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::MalformedTable, origin + " is empty");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  auto header = split_csv_line(line);
  if (header.empty() || header.front() != "sample_id") {
    throw Error(ErrorCode::MalformedTable, origin + ": first column must be \"sample_id\"");
  }
  t.columns.assign(header.begin() + 1, header.end());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::MalformedTable, origin + ":" + std::to_string(lineno) + " has " +
                                                 std::to_string(fields.size()) +
                                                 " fields, header has " +
                                                 std::to_string(header.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      row.push_back(parse_double(fields[c], origin + ":" + std::to_string(lineno)));
    }
    t.ids.push_back(std::move(fields.front()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace detail

/// Parses a metric CSV. With `layers`, the table must have a "layer" column:
/// rows outside the range are dropped, the remaining rows of each sample_id are
/// averaged, and the layer column is removed. Without it, ids must be unique.
inline MetricTable parse_metric_csv(std::istream& in, const std::string& origin,
                                    std::optional<LayerRange> layers = std::nullopt) {
  auto raw = detail::parse_raw_csv(in, origin);
  if (!layers) {
    MetricTable t(raw.columns);
    for (std::size_t r = 0; r < raw.ids.size(); ++r) t.add_row(raw.ids[r], raw.rows[r]);
    return t;
  }
  std::size_t layer_col = raw.columns.size();
  for (std::size_t c = 0; c < raw.columns.size(); ++c) {
    if (raw.columns[c] == "layer") layer_col = c;
  }
  if (layer_col == raw.columns.size()) {
    throw Error(ErrorCode::UnknownColumn, origin + " has no \"layer\" column to filter on");
  }
  std::vector<std::string> kept_cols;
  for (std::size_t c = 0; c < raw.columns.size(); ++c) {
    if (c != layer_col) kept_cols.push_back(raw.columns[c]);
  }
  // Preserve first-appearance order of ids.
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t r = 0; r < raw.ids.size(); ++r) {
    const double layer = raw.rows[r][layer_col];
    if (!(layer >= layers->first && layer <= layers->last)) continue;
    auto [it, fresh] =
        acc.try_emplace(raw.ids[r], std::vector<double>(kept_cols.size(), 0.0), 0);
    if (fresh) order.push_back(raw.ids[r]);
    std::size_t k = 0;
    for (std::size_t c = 0; c < raw.columns.size(); ++c) {
      if (c == layer_col) continue;
      it->second.first[k++] += raw.rows[r][c];
    }
    ++it->second.second;
  }
  MetricTable t(kept_cols);
  for (const auto& id : order) {
    auto& [sum, n] = acc.at(id);
    for (double& v : sum) v /= static_cast<double>(n);
    t.add_row(id, sum);
  }
  return t;
}

inline MetricTable read_metric_csv(const std::filesystem::path& path,
                                   std::optional<LayerRange> layers = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return parse_metric_csv(in, path.string(), layers);
}

inline void write_metric_csv(const MetricTable& t, std::ostream& out) {
  out << "sample_id";
  for (const auto& c : t.columns()) out << ',' << csv_escape(c);
  out << '\n';
  for (std::size_t r = 0; r < t.num_rows(); ++r) {
    out << csv_escape(t.ids()[r]);
    for (const auto& c : t.columns()) out << ',' << format_double(t.at(r, c));
    out << '\n';
  }
}

inline void write_metric_csv(const MetricTable& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  write_metric_csv(t, out);
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

}  // namespace hopfattn
