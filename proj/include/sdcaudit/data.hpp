#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdcaudit/csv.hpp"
#include "sdcaudit/error.hpp"
#include "sdcaudit/matrix.hpp"
#include "sdcaudit/numfmt.hpp"
#include "sdcaudit/random.hpp"

namespace sdcaudit {

struct Categorical {
  std::vector<std::string> levels;
};

struct Continuous {
  double min = 0.0;
  double max = 1.0;
};

struct AttributeSpec {
  std::string name;
  std::variant<Categorical, Continuous> kind;

  bool is_categorical() const { return std::holds_alternative<Categorical>(kind); }
  const Categorical& categorical() const { return std::get<Categorical>(kind); }
  const Continuous& continuous() const { return std::get<Continuous>(kind); }
};

struct FeatureSchema {
  std::vector<AttributeSpec> attributes;
  std::string label;
  std::size_t n_classes = 2;

  std::size_t width() const { return attributes.size(); }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i) {
      if (attributes[i].name == name) return i;
    }
    throw AuditError(ErrorCode::AttributeNotInSchema, "no attribute named '" + std::string(name) + "'");
  }

  /// Throws InvalidSchema on the first broken invariant.
  void validate() const {
    if (n_classes < 2) {
      throw AuditError(ErrorCode::InvalidSchema, "n_classes must be >= 2");
    }
    if (label.empty()) {
      throw AuditError(ErrorCode::InvalidSchema, "label column name is empty");
    }
    std::set<std::string> seen{label};
    for (const auto& attr : attributes) {
      if (attr.name.empty() || !seen.insert(attr.name).second) {
        throw AuditError(ErrorCode::InvalidSchema,
                         "attribute name '" + attr.name + "' is empty or duplicated");
      }
      if (attr.is_categorical()) {
        const auto& levels = attr.categorical().levels;
        std::set<std::string> unique(levels.begin(), levels.end());
        if (levels.empty() || unique.size() != levels.size()) {
          throw AuditError(ErrorCode::InvalidSchema,
                           "attribute '" + attr.name + "' needs non-empty unique levels");
        }
      } else {
        const auto& c = attr.continuous();
        if (!std::isfinite(c.min) || !std::isfinite(c.max) || !(c.min < c.max)) {
          throw AuditError(ErrorCode::InvalidSchema,
                           "attribute '" + attr.name + "' needs finite min < max");
        }
      }
    }
  }
};

inline FeatureSchema schema_from_json(const nlohmann::json& j) {
  auto fail = [](const std::string& what) { throw AuditError(ErrorCode::InvalidSchema, what); };
  if (!j.is_object()) fail("schema must be a JSON object");
  if (!j.contains("label") || !j["label"].is_string()) fail("/label must be a string");
  if (!j.contains("n_classes") || !j["n_classes"].is_number_integer()) fail("/n_classes must be an integer");
  if (!j.contains("attributes") || !j["attributes"].is_array()) fail("/attributes must be an array");

  FeatureSchema schema;
  schema.label = j["label"].get<std::string>();
  const auto n_classes = j["n_classes"].get<std::int64_t>();
  if (n_classes < 2) fail("/n_classes must be >= 2");
  schema.n_classes = static_cast<std::size_t>(n_classes);

  for (std::size_t i = 0; i < j["attributes"].size(); ++i) {
    const auto& a = j["attributes"][i];
    const std::string where = "/attributes/" + std::to_string(i);
    if (!a.is_object() || !a.contains("name") || !a["name"].is_string()) fail(where + "/name must be a string");
    if (!a.contains("kind") || !a["kind"].is_string()) fail(where + "/kind must be a string");
    AttributeSpec spec;
    spec.name = a["name"].get<std::string>();
    const auto kind = a["kind"].get<std::string>();
    if (kind == "categorical") {
      if (!a.contains("levels") || !a["levels"].is_array()) fail(where + "/levels must be an array");
      Categorical c;
      for (const auto& level : a["levels"]) {
        if (!level.is_string()) fail(where + "/levels entries must be strings");
        c.levels.push_back(level.get<std::string>());
      }
      spec.kind = std::move(c);
    } else if (kind == "continuous") {
      if (!a.contains("min") || !a["min"].is_number() || !a.contains("max") || !a["max"].is_number()) {
        fail(where + " needs numeric min and max");
      }
      spec.kind = Continuous{a["min"].get<double>(), a["max"].get<double>()};
    } else {
      fail(where + "/kind must be 'categorical' or 'continuous'");
    }
    schema.attributes.push_back(std::move(spec));
  }
  schema.validate();
  return schema;
}

inline nlohmann::json schema_to_json(const FeatureSchema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& attr : schema.attributes) {
    nlohmann::json a{{"name", attr.name}};
    if (attr.is_categorical()) {
      a["kind"] = "categorical";
      a["levels"] = attr.categorical().levels;
    } else {
      a["kind"] = "continuous";
      a["min"] = attr.continuous().min;
      a["max"] = attr.continuous().max;
    }
    attrs.push_back(std::move(a));
  }
  return {{"label", schema.label}, {"n_classes", schema.n_classes}, {"attributes", attrs}};
}

inline FeatureSchema load_schema(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(csv::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw AuditError(ErrorCode::InvalidSchema, "'" + path + "' is not valid JSON: " + e.what());
  }
  return schema_from_json(j);
}

/// Tabular records encoded against a schema: categorical cells hold the level
/// index, continuous cells the value. Immutable once built.
struct Dataset {
  FeatureSchema schema;
  Matrix rows;
  std::vector<std::size_t> labels;

  std::size_t size() const { return labels.size(); }

  void validate() const {
    if (rows.rows() != labels.size()) {
      throw AuditError(ErrorCode::ShapeMismatch, "row count differs from label count");
    }
    if (rows.rows() > 0 && rows.cols() != schema.width()) {
      throw AuditError(ErrorCode::ShapeMismatch, "row width differs from schema width");
    }
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      if (labels[r] >= schema.n_classes) {
        throw AuditError(ErrorCode::UnknownLevel, "label out of range at row " + std::to_string(r));
      }
      for (std::size_t c = 0; c < schema.width(); ++c) {
        const auto& attr = schema.attributes[c];
        const double v = rows(r, c);
        if (attr.is_categorical()) {
          const auto n_levels = static_cast<double>(attr.categorical().levels.size());
          if (v < 0 || v >= n_levels || v != std::floor(v)) {
            throw AuditError(ErrorCode::UnknownLevel, "invalid level index at row " + std::to_string(r) +
                                                          ", column '" + attr.name + "'");
          }
        } else if (!std::isfinite(v)) {
          throw AuditError(ErrorCode::NonNumericContinuous,
                           "non-finite value at row " + std::to_string(r) + ", column '" + attr.name + "'");
        }
      }
    }
  }
};

/// Encodes parsed CSV records (header first). Row indices in errors are
/// 0-based data rows, excluding the header.
inline Dataset encode_records(const std::vector<csv::Record>& records, const FeatureSchema& schema) {
  schema.validate();
  if (records.empty()) {
    throw AuditError(ErrorCode::EmptyDataset, "CSV has no header row");
  }
  const auto& header = records.front();
  std::map<std::string, std::size_t> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto& name = header[i];
    bool known = name == schema.label;
    for (const auto& attr : schema.attributes) known = known || attr.name == name;
    if (!known) {
      throw AuditError(ErrorCode::MissingColumn, "CSV column '" + name + "' is not in the schema");
    }
    column_of[name] = i;
  }
  for (const auto& attr : schema.attributes) {
    if (!column_of.contains(attr.name)) {
      throw AuditError(ErrorCode::MissingColumn, "schema attribute '" + attr.name + "' missing from CSV header");
    }
  }
  if (!column_of.contains(schema.label)) {
    throw AuditError(ErrorCode::MissingColumn, "label column '" + schema.label + "' missing from CSV header");
  }
  if (records.size() < 2) {
    throw AuditError(ErrorCode::EmptyDataset, "CSV has a header but no data rows");
  }

  Dataset d;
  d.schema = schema;
  d.rows = Matrix(records.size() - 1, schema.width());
  d.labels.resize(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::size_t row = r - 1;
    if (rec.size() != header.size()) {
      throw AuditError(ErrorCode::MissingColumn, "row " + std::to_string(row) + " has " +
                                                     std::to_string(rec.size()) + " fields, header has " +
                                                     std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < schema.width(); ++c) {
      const auto& attr = schema.attributes[c];
      const std::string& cell = rec[column_of[attr.name]];
      if (attr.is_categorical()) {
        const auto& levels = attr.categorical().levels;
        auto it = std::find(levels.begin(), levels.end(), cell);
        if (it == levels.end()) {
          throw AuditError(ErrorCode::UnknownLevel, "value '" + cell + "' at row " + std::to_string(row) +
                                                        ", column '" + attr.name + "' is not a declared level");
        }
        d.rows(row, c) = static_cast<double>(it - levels.begin());
      } else {
        auto value = parse_double(cell);
        if (!value) {
          throw AuditError(ErrorCode::NonNumericContinuous, "value '" + cell + "' at row " +
                                                                std::to_string(row) + ", column '" +
                                                                attr.name + "' is not a finite number");
        }
        d.rows(row, c) = *value;
      }
    }
    const std::string& label_cell = rec[column_of[schema.label]];
    auto label = parse_double(label_cell);
    if (!label || *label < 0 || *label != std::floor(*label) ||
        *label >= static_cast<double>(schema.n_classes)) {
      throw AuditError(ErrorCode::UnknownLevel, "label '" + label_cell + "' at row " + std::to_string(row) +
                                                    " is not a class index below " +
                                                    std::to_string(schema.n_classes));
    }
    d.labels[row] = static_cast<std::size_t>(*label);
  }
  return d;
}

inline Dataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  return encode_records(csv::read(csv_path), load_schema(schema_path));
}

/// Inverse of encode_records: header in schema order, label column last.
inline std::vector<csv::Record> decode_records(const Dataset& d) {
  std::vector<csv::Record> out;
  csv::Record header;
  for (const auto& attr : d.schema.attributes) header.push_back(attr.name);
  header.push_back(d.schema.label);
  out.push_back(std::move(header));
  for (std::size_t r = 0; r < d.size(); ++r) {
    csv::Record rec;
    for (std::size_t c = 0; c < d.schema.width(); ++c) {
      const auto& attr = d.schema.attributes[c];
      if (attr.is_categorical()) {
        rec.push_back(attr.categorical().levels[static_cast<std::size_t>(d.rows(r, c))]);
      } else {
        rec.push_back(shortest_repr(d.rows(r, c)));
      }
    }
    rec.push_back(std::to_string(d.labels[r]));
    out.push_back(std::move(rec));
  }
  return out;
}

struct Split {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
};

/// Stratified, seeded train/test partition. Each class contributes
/// round(n_class * test_fraction) records to the test part.
inline Split split_dataset(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw AuditError(ErrorCode::DegenerateSplit, "test_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(d.schema.n_classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);

  Rng rng(seed);
  Split s;
  s.seed = seed;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
    s.test_indices.insert(s.test_indices.end(), members.begin(), members.begin() + n_test);
    s.train_indices.insert(s.train_indices.end(), members.begin() + n_test, members.end());
  }
  if (s.train_indices.empty() || s.test_indices.empty()) {
    throw AuditError(ErrorCode::DegenerateSplit,
                     "split of " + std::to_string(d.size()) + " rows leaves an empty part");
  }
  std::sort(s.train_indices.begin(), s.train_indices.end());
  std::sort(s.test_indices.begin(), s.test_indices.end());
  return s;
}

/// Completion candidates for one attribute: every level index, or an evenly
/// spaced grid over the declared range with both ends included.
inline std::vector<double> candidate_values(const AttributeSpec& spec, std::size_t grid_size) {
  std::vector<double> values;
  if (spec.is_categorical()) {
    const auto n = spec.categorical().levels.size();
    for (std::size_t i = 0; i < n; ++i) values.push_back(static_cast<double>(i));
    return values;
  }
  if (grid_size < 2) {
    throw AuditError(ErrorCode::InvalidSchema, "continuous grid_size must be >= 2");
  }
  const auto [lo, hi] = spec.continuous();
  const double span = hi - lo;
  for (std::size_t i = 0; i < grid_size; ++i) {
    values.push_back(lo + span * static_cast<double>(i) / static_cast<double>(grid_size - 1));
  }
  values.back() = hi;
  return values;
}

}  // namespace sdcaudit
