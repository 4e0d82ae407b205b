#pragma once

// CSV ingestion and cleaning for academic-record exports.
//
// The expected export carries two identifier columns, six criteria scores and
// a pass/fail remark:
//
//   student_id,class_record_id,att_prelim,cp_prelim,exam_prelim,
//   att_midterm,cp_midterm,exam_midterm,remark
//
// Cleaning drops the identifier columns, rows with missing or unparseable
// scores, and exact duplicate rows, then binarizes the remark (0 = failed,
// 1 = passed).

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gradecast/error.hpp"

namespace gradecast {

inline constexpr std::size_t kFeatureCount = 6;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "att_prelim", "cp_prelim", "exam_prelim", "att_midterm", "cp_midterm", "exam_midterm"};

using FeatureVector = std::array<double, kFeatureCount>;

enum class PassLabel : int { failed = 0, passed = 1 };

constexpr int to_int(PassLabel label) noexcept { return static_cast<int>(label); }

enum class ColumnRole { identifier, feature, label };

struct ColumnSpec {
  std::string name;
  ColumnRole role;
  std::size_t order;      // position in the canonical header
  bool required = true;
};

struct ColumnSchema {
  std::vector<ColumnSpec> columns;

  /// student_id, class_record_id (optional identifiers), the six criteria in
  /// X_0..X_5 order, and the remark label.
  static ColumnSchema canonical() {
    ColumnSchema s;
    s.columns.push_back({"student_id", ColumnRole::identifier, 0, false});
    s.columns.push_back({"class_record_id", ColumnRole::identifier, 1, false});
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      s.columns.push_back({std::string(kFeatureNames[i]), ColumnRole::feature, i + 2, true});
    }
    s.columns.push_back({"remark", ColumnRole::label, 8, true});
    return s;
  }

  std::vector<std::string> feature_names() const {
    std::vector<const ColumnSpec*> feats;
    for (const auto& c : columns) {
      if (c.role == ColumnRole::feature) feats.push_back(&c);
    }
    std::sort(feats.begin(), feats.end(),
              [](const ColumnSpec* a, const ColumnSpec* b) { return a->order < b->order; });
    std::vector<std::string> out;
    for (const auto* c : feats) out.push_back(c->name);
    return out;
  }

  const ColumnSpec& label_column() const {
    for (const auto& c : columns) {
      if (c.role == ColumnRole::label) return c;
    }
    throw SchemaError("schema has no label column");
  }

  void validate() const {
    std::size_t n_label = 0;
    for (const auto& c : columns) n_label += c.role == ColumnRole::label;
    const auto feats = feature_names();
    if (n_label != 1) throw SchemaError("schema must have exactly one label column");
    if (feats.size() != kFeatureCount) throw SchemaError("schema must have exactly six feature columns");
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (feats[i] != kFeatureNames[i]) {
        throw SchemaError("feature column " + std::to_string(i) + " must be '" +
                          std::string(kFeatureNames[i]) + "', got '" + feats[i] + "'");
      }
    }
  }
};

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;

  std::optional<std::size_t> column_index(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

struct StudentRecord {
  FeatureVector scores{};
  PassLabel label = PassLabel::failed;

  friend bool operator==(const StudentRecord&, const StudentRecord&) = default;
};

struct CleaningReport {
  std::vector<std::string> dropped_columns;
  std::size_t input_rows = 0;
  std::size_t output_rows = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_duplicate = 0;
  std::string label_mapping;
};

struct Dataset {
  std::vector<StudentRecord> records;
  std::vector<std::string> feature_names;
  std::string source;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

struct CleanOptions {
  bool validate_range = false;  // reject scores outside [0, 100]
};

struct CleanResult {
  Dataset dataset;
  CleaningReport report;
};

inline constexpr std::string_view kLabelMappingDescription =
    "PASSED|PASS|1 -> 1; FAILED|FAIL|0 -> 0 (case-insensitive)";

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

/// Splits CSV text into records of cells. Quoted cells may contain commas,
/// doubled quotes and line breaks. Blank lines are skipped.
inline std::vector<std::vector<std::string>> split_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;

  const auto end_row = [&] {
    if (row_has_content || !row.empty()) {
      row.push_back(std::move(cell));
      records.push_back(std::move(row));
    }
    row.clear();
    cell.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(cell));
        cell.clear();
        row_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_row();
        break;
      case '\n':
        end_row();
        break;
      default:
        cell.push_back(c);
        row_has_content = true;
    }
  }
  end_row();
  return records;
}

/// Period decimal separator only; anything left unconsumed (thousands
/// separators, units, stray text) makes the cell unparseable.
inline std::optional<double> parse_score(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Maps a remark token to a label. Accepts PASSED/PASS/1 and FAILED/FAIL/0,
/// case-insensitively; everything else is a LabelMappingError.
inline PassLabel binarize_label(std::string_view token) {
  const std::string t = detail::upper(detail::trim(token));
  if (t.empty()) throw LabelMappingError("empty label token");
  if (t == "PASSED" || t == "PASS" || t == "1") return PassLabel::passed;
  if (t == "FAILED" || t == "FAIL" || t == "0") return PassLabel::failed;
  throw LabelMappingError("unknown label token '" + std::string(detail::trim(token)) + "'");
}

/// Parses CSV text into a RawTable and checks the header against `schema`.
/// Column order in the file is free; required columns must all be present.
inline RawTable parse_csv(std::string_view text, const ColumnSchema& schema = ColumnSchema::canonical(),
                          std::string source = {}) {
  schema.validate();
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  auto records = detail::split_records(text);
  if (records.empty()) throw EmptyInputError("input has no header row");

  RawTable table;
  table.source = std::move(source);
  for (const auto& cell : records.front()) table.header.emplace_back(detail::trim(cell));

  std::set<std::string> seen;
  for (const auto& name : table.header) {
    if (!seen.insert(name).second) throw SchemaError("duplicate column '" + name + "'");
  }
  for (const auto& col : schema.columns) {
    if (col.required && !seen.contains(col.name)) {
      throw SchemaError("missing required column '" + col.name + "'");
    }
  }

  if (records.size() == 1) throw EmptyInputError("input has a header but no data rows");

  table.rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw ParseError("row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                           " cells, header has " + std::to_string(table.header.size()),
                       r);
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

/// Drops identifier and unknown columns, rows with missing scores and exact
/// duplicate rows, and binarizes the label column.
inline CleanResult clean(const RawTable& raw, const ColumnSchema& schema = ColumnSchema::canonical(),
                         const CleanOptions& options = {}) {
  schema.validate();

  std::array<std::size_t, kFeatureCount> feature_idx{};
  const auto feature_names = schema.feature_names();
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto idx = raw.column_index(feature_names[f]);
    if (!idx) throw SchemaError("missing required column '" + feature_names[f] + "'");
    feature_idx[f] = *idx;
  }
  const auto& label_name = schema.label_column().name;
  const auto label_idx = raw.column_index(label_name);
  if (!label_idx) throw SchemaError("missing required column '" + label_name + "'");

  CleanResult result;
  auto& report = result.report;
  report.input_rows = raw.rows.size();
  report.label_mapping = std::string(kLabelMappingDescription);
  for (std::size_t i = 0; i < raw.header.size(); ++i) {
    const bool kept = i == *label_idx ||
                      std::find(feature_idx.begin(), feature_idx.end(), i) != feature_idx.end();
    if (!kept) report.dropped_columns.push_back(raw.header[i]);
  }

  auto& ds = result.dataset;
  ds.feature_names = feature_names;
  ds.source = raw.source;

  std::set<std::vector<std::string>> seen_rows;
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    const auto& row = raw.rows[r];
    const std::size_t row_no = r + 1;
    if (row.size() != raw.header.size()) {
      throw ParseError("row " + std::to_string(row_no) + " has wrong arity", row_no);
    }

    StudentRecord rec;
    bool missing = detail::trim(row[*label_idx]).empty();
    for (std::size_t f = 0; f < kFeatureCount && !missing; ++f) {
      const auto v = detail::parse_score(row[feature_idx[f]]);
      if (!v) {
        missing = true;
      } else {
        rec.scores[f] = *v;
      }
    }
    if (missing) {
      ++report.dropped_missing;
      continue;
    }

    try {
      rec.label = binarize_label(row[*label_idx]);
    } catch (const LabelMappingError& e) {
      throw LabelMappingError(std::string(e.what()) + " at row " + std::to_string(row_no), row_no);
    }

    if (options.validate_range) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        if (rec.scores[f] < 0.0 || rec.scores[f] > 100.0) {
          throw RangeError(feature_names[f] + " out of [0, 100] at row " + std::to_string(row_no),
                           row_no);
        }
      }
    }

    if (!seen_rows.insert(row).second) {
      ++report.dropped_duplicate;
      continue;
    }
    ds.records.push_back(rec);
  }

  report.output_rows = ds.records.size();
  if (ds.records.empty()) throw EmptyDatasetError("no rows survived cleaning");
  return result;
}

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_exact(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

/// Serializes a cleaned dataset back to CSV. A `student_id` column carrying
/// the 1-based record ordinal keeps distinct records distinct, so cleaning
/// the output again drops nothing.
inline std::string to_csv(const Dataset& ds) {
  std::string out = "student_id";
  for (const auto& name : kFeatureNames) {
    out += ',';
    out += name;
  }
  out += ",remark\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& rec = ds.records[i];
    out += std::to_string(i + 1);
    for (const double v : rec.scores) {
      out += ',';
      out += format_exact(v);
    }
    out += rec.label == PassLabel::passed ? ",PASSED\n" : ",FAILED\n";
  }
  return out;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// parse_csv + clean on a file.
inline CleanResult load_csv(const std::filesystem::path& path, const CleanOptions& options = {}) {
  const auto schema = ColumnSchema::canonical();
  const auto raw = parse_csv(read_text_file(path), schema, path.filename().string());
  return clean(raw, schema, options);
}

}  // namespace gradecast
