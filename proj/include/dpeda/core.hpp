//
// Copyright 2026 The dpeda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "dpeda/error.hpp"
#include "dpeda/random.hpp"
#include "json.hpp"

namespace dpeda {

enum class ColumnKind { kNumeric, kCategorical };

inline std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::kNumeric ? "numeric" : "categorical";
}

// Label of the histogram cell that counts missing categorical values.
inline constexpr std::string_view kMissingLabel = "(missing)";

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;

  double width() const { return upper - lower; }
};

// Public, data-independent metadata for one column. Bounds and domains are
// supplied by the operator and are never estimated from the data.
struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  Bounds bounds;                          // numeric only
  std::vector<std::string> domain;        // categorical only
  std::vector<std::string> missing_tokens;

  static ColumnSpec numeric(std::string name, double lower, double upper,
                            std::vector<std::string> missing_tokens = {}) {
    ColumnSpec spec;
    spec.name = std::move(name);
    spec.kind = ColumnKind::kNumeric;
    spec.bounds = {lower, upper};
    spec.missing_tokens = std::move(missing_tokens);
    return spec;
  }

  static ColumnSpec categorical(std::string name, std::vector<std::string> domain,
                                std::vector<std::string> missing_tokens = {}) {
    ColumnSpec spec;
    spec.name = std::move(name);
    spec.kind = ColumnKind::kCategorical;
    spec.domain = std::move(domain);
    spec.missing_tokens = std::move(missing_tokens);
    return spec;
  }

  bool is_numeric() const { return kind == ColumnKind::kNumeric; }
  bool is_categorical() const { return kind == ColumnKind::kCategorical; }
};

class Schema {
 public:
  Schema() = default;

  explicit Schema(std::vector<ColumnSpec> columns, std::string name = "schema")
      : name_(std::move(name)), columns_(std::move(columns)) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const ColumnSpec& c = columns_[i];
      if (c.name.empty()) throw ParamError("column name must be non-empty");
      if (!seen.insert(c.name).second) {
        throw ParamError("duplicate column name '" + c.name + "'");
      }
      if (c.is_numeric()) {
        if (!std::isfinite(c.bounds.lower) || !std::isfinite(c.bounds.upper) ||
            !(c.bounds.lower < c.bounds.upper)) {
          throw ParamError("column '" + c.name + "': bounds require L < U");
        }
      } else {
        if (c.domain.empty()) {
          throw ParamError("column '" + c.name + "': domain must be non-empty");
        }
        std::unordered_set<std::string> labels;
        for (const auto& label : c.domain) {
          if (!labels.insert(label).second) {
            throw ParamError("column '" + c.name + "': duplicate label '" + label + "'");
          }
          if (label == kMissingLabel) {
            throw ParamError("column '" + c.name + "': label '(missing)' is reserved");
          }
        }
        for (const auto& token : c.missing_tokens) {
          if (labels.count(token) != 0) {
            throw ParamError("column '" + c.name + "': missing token '" + token +
                             "' collides with a domain label");
          }
        }
      }
      index_.emplace(c.name, i);
    }
  }

  const std::string& name() const { return name_; }
  const std::vector<ColumnSpec>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw NotFound("unknown column '" + std::string(name) + "'");
    return *idx;
  }

  // n and c of the privacy-loss formulas.
  std::size_t numeric_count() const {
    return static_cast<std::size_t>(std::count_if(
        columns_.begin(), columns_.end(), [](const auto& c) { return c.is_numeric(); }));
  }
  std::size_t categorical_count() const { return columns_.size() - numeric_count(); }

  std::vector<std::size_t> numeric_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].is_numeric()) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> categorical_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns_.size(); ++i)
      if (columns_[i].is_categorical()) out.push_back(i);
    return out;
  }

 private:
  std::string name_ = "schema";
  std::vector<ColumnSpec> columns_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SchemaPtr = std::shared_ptr<const Schema>;

// ---------------------------------------------------------------------------
// Schema documents
//
//   {
//     "name": "adult",
//     "columns": [
//       {"name": "age", "kind": "numeric", "bounds": [17, 90],
//        "missing_tokens": ["?"]},
//       {"name": "sex", "kind": "categorical", "domain": ["Female", "Male"]}
//     ]
//   }
// ---------------------------------------------------------------------------

inline nlohmann::json schema_to_json(const Schema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns()) {
    nlohmann::json j;
    j["name"] = c.name;
    j["kind"] = std::string(to_string(c.kind));
    if (c.is_numeric()) {
      j["bounds"] = {c.bounds.lower, c.bounds.upper};
    } else {
      j["domain"] = c.domain;
    }
    j["missing_tokens"] = c.missing_tokens;
    cols.push_back(std::move(j));
  }
  return {{"name", schema.name()}, {"columns", std::move(cols)}};
}

inline Schema schema_from_json(const nlohmann::json& doc) {
  try {
    std::vector<ColumnSpec> columns;
    for (const auto& j : doc.at("columns")) {
      ColumnSpec c;
      c.name = j.at("name").get<std::string>();
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "numeric") {
        c.kind = ColumnKind::kNumeric;
        const auto& b = j.at("bounds");
        if (!b.is_array() || b.size() != 2) {
          throw ParamError("column '" + c.name + "': bounds must be [L, U]");
        }
        c.bounds = {b[0].get<double>(), b[1].get<double>()};
      } else if (kind == "categorical") {
        c.kind = ColumnKind::kCategorical;
        c.domain = j.at("domain").get<std::vector<std::string>>();
      } else {
        throw ParamError("column '" + c.name + "': unknown kind '" + kind + "'");
      }
      if (j.contains("missing_tokens")) {
        c.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
      }
      columns.push_back(std::move(c));
    }
    return Schema(std::move(columns), doc.value("name", std::string("schema")));
  } catch (const nlohmann::json::exception& e) {
    throw ParamError(std::string("malformed schema document: ") + e.what());
  }
}

inline Schema load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open schema file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParamError("schema file '" + path + "': " + e.what());
  }
  return schema_from_json(doc);
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

using NumericColumn = std::vector<std::optional<double>>;
// Category codes index into ColumnSpec::domain.
using CategoricalColumn = std::vector<std::optional<std::uint32_t>>;
using ColumnData = std::variant<NumericColumn, CategoricalColumn>;

inline double clamp_numeric(double value, Bounds bounds) {
  return std::min(bounds.upper, std::max(bounds.lower, value));
}

// Immutable table of m records. Every present numeric value lies within its
// declared bounds and every present category code within its domain.
class Dataset {
 public:
  Dataset() : schema_(std::make_shared<Schema>()) {}

  Dataset(SchemaPtr schema, std::vector<ColumnData> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (columns_.size() != schema_->size()) {
      throw SchemaMismatch("dataset has " + std::to_string(columns_.size()) +
                           " columns, schema declares " +
                           std::to_string(schema_->size()));
    }
    rows_ = 0;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const ColumnSpec& spec = schema_->column(i);
      std::size_t len = 0;
      if (spec.is_numeric()) {
        const auto* col = std::get_if<NumericColumn>(&columns_[i]);
        if (col == nullptr) throw KindError("column '" + spec.name + "' is not numeric");
        for (const auto& v : *col) {
          if (v && !(*v >= spec.bounds.lower && *v <= spec.bounds.upper)) {
            throw DomainError("column '" + spec.name + "': value outside bounds");
          }
        }
        len = col->size();
      } else {
        const auto* col = std::get_if<CategoricalColumn>(&columns_[i]);
        if (col == nullptr) throw KindError("column '" + spec.name + "' is not categorical");
        for (const auto& v : *col) {
          if (v && *v >= spec.domain.size()) {
            throw DomainError("column '" + spec.name + "': category code out of domain");
          }
        }
        len = col->size();
      }
      if (i == 0) {
        rows_ = len;
      } else if (len != rows_) {
        throw SchemaMismatch("ragged columns");
      }
    }
  }

  const Schema& schema() const { return *schema_; }
  const SchemaPtr& schema_ptr() const { return schema_; }
  std::size_t rows() const { return rows_; }
  const std::vector<ColumnData>& columns() const { return columns_; }

  const NumericColumn& numeric(std::size_t index) const {
    const auto* col = std::get_if<NumericColumn>(&columns_.at(index));
    if (col == nullptr) {
      throw KindError("column '" + schema_->column(index).name + "' is not numeric");
    }
    return *col;
  }
  const NumericColumn& numeric(std::string_view name) const {
    return numeric(schema_->index_of(name));
  }

  const CategoricalColumn& categorical(std::size_t index) const {
    const auto* col = std::get_if<CategoricalColumn>(&columns_.at(index));
    if (col == nullptr) {
      throw KindError("column '" + schema_->column(index).name + "' is not categorical");
    }
    return *col;
  }
  const CategoricalColumn& categorical(std::string_view name) const {
    return categorical(schema_->index_of(name));
  }

  std::size_t missing_in(std::size_t index) const {
    return std::visit(
        [](const auto& col) {
          return static_cast<std::size_t>(
              std::count_if(col.begin(), col.end(), [](const auto& v) { return !v; }));
        },
        columns_.at(index));
  }

 private:
  SchemaPtr schema_;
  std::vector<ColumnData> columns_;
  std::size_t rows_ = 0;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

enum class IngestPolicy { kStrict, kCoerce };

// RFC 4180 reader: comma delimiter, double-quote quoting, CRLF or LF rows.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char ch;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field_started && field.empty()) {
          quoted = true;
          field_started = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

inline bool is_missing_token(const ColumnSpec& spec, std::string_view cell) {
  return std::find(spec.missing_tokens.begin(), spec.missing_tokens.end(), cell) !=
         spec.missing_tokens.end();
}

}  // namespace detail

inline Dataset load_dataset(std::istream& source, SchemaPtr schema,
                            IngestPolicy policy = IngestPolicy::kStrict) {
  auto rows = parse_csv(source);
  if (rows.empty()) throw SchemaMismatch("missing header row");
  const auto& header = rows.front();
  bool header_ok = header.size() == schema->size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) {
    header_ok = detail::trim(header[i]) == schema->column(i).name;
  }
  if (!header_ok) {
    std::string got;
    for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
    throw SchemaMismatch("header '" + got + "' does not match schema columns");
  }

  const std::size_t m = rows.size() - 1;
  std::vector<ColumnData> columns;
  std::vector<std::unordered_map<std::string, std::uint32_t>> code_of(schema->size());
  for (std::size_t j = 0; j < schema->size(); ++j) {
    const ColumnSpec& spec = schema->column(j);
    if (spec.is_numeric()) {
      columns.emplace_back(NumericColumn(m));
    } else {
      columns.emplace_back(CategoricalColumn(m));
      for (std::uint32_t k = 0; k < spec.domain.size(); ++k) code_of[j].emplace(spec.domain[k], k);
    }
  }

  for (std::size_t r = 0; r < m; ++r) {
    const auto& cells = rows[r + 1];
    if (cells.size() != schema->size()) {
      throw ParseError(r + 1, cells.size() < schema->size() ? schema->column(cells.size()).name : "",
                       "expected " + std::to_string(schema->size()) + " fields, found " +
                           std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < schema->size(); ++j) {
      const ColumnSpec& spec = schema->column(j);
      const std::string& cell = cells[j];
      if (detail::is_missing_token(spec, cell)) continue;
      if (spec.is_numeric()) {
        auto value = detail::parse_real(cell);
        if (!value) {
          if (policy == IngestPolicy::kStrict) {
            throw ParseError(r + 1, spec.name, "cannot parse '" + cell + "' as a number");
          }
          continue;
        }
        std::get<NumericColumn>(columns[j])[r] = clamp_numeric(*value, spec.bounds);
      } else {
        auto it = code_of[j].find(cell);
        if (it == code_of[j].end()) {
          if (policy == IngestPolicy::kStrict) {
            throw DomainError("row " + std::to_string(r + 1) + ", column '" + spec.name +
                              "': '" + cell + "' is not in the declared domain");
          }
          continue;
        }
        std::get<CategoricalColumn>(columns[j])[r] = it->second;
      }
    }
  }
  return Dataset(std::move(schema), std::move(columns));
}

inline Dataset load_dataset_file(const std::string& path, SchemaPtr schema,
                                 IngestPolicy policy = IngestPolicy::kStrict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open data file '" + path + "'");
  return load_dataset(in, std::move(schema), policy);
}

// Shortest decimal text that parses back to the same double.
inline std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Writes the dataset in the format load_dataset ingests. Missing cells are
// written as the column's first missing token, or as an empty field when the
// column declares none.
inline void write_csv(std::ostream& out, const Dataset& ds) {
  const Schema& schema = ds.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    out << (j ? "," : "") << csv_escape(schema.column(j).name);
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      const ColumnSpec& spec = schema.column(j);
      if (j) out << ',';
      const std::string missing = spec.missing_tokens.empty() ? "" : spec.missing_tokens.front();
      if (spec.is_numeric()) {
        const auto& v = ds.numeric(j)[r];
        out << (v ? format_real(*v) : csv_escape(missing));
      } else {
        const auto& v = ds.categorical(j)[r];
        out << csv_escape(v ? spec.domain[*v] : missing);
      }
    }
    out << '\n';
  }
}

// Replaces exactly round(fraction * m) present cells of a numeric column by
// missing markers, chosen uniformly without replacement. Rounding is half-up.
inline Dataset inject_missing(const Dataset& ds, std::string_view column, double fraction,
                              std::uint64_t seed) {
  const std::size_t idx = ds.schema().index_of(column);
  if (!ds.schema().column(idx).is_numeric()) {
    throw KindError("inject_missing: column '" + std::string(column) + "' is not numeric");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ParamError("inject_missing: fraction must lie in [0, 1]");
  }
  const auto requested =
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ds.rows()) + 0.5));
  const NumericColumn& original = ds.numeric(idx);
  std::vector<std::size_t> present;
  for (std::size_t r = 0; r < original.size(); ++r)
    if (original[r]) present.push_back(r);
  if (present.size() < requested) {
    throw InsufficientData("inject_missing: " + std::to_string(requested) +
                           " cells requested but only " + std::to_string(present.size()) +
                           " present");
  }

  Rng rng(seed);
  // Partial Fisher-Yates: the first `requested` slots become the sample.
  for (std::size_t i = 0; i < requested; ++i) {
    const std::size_t j = i + uniform_index(rng, present.size() - i);
    std::swap(present[i], present[j]);
  }
  std::vector<ColumnData> columns = ds.columns();
  auto& target = std::get<NumericColumn>(columns[idx]);
  for (std::size_t i = 0; i < requested; ++i) target[present[i]].reset();
  return Dataset(ds.schema_ptr(), std::move(columns));
}

}  // namespace dpeda
