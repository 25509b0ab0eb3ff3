#include "rrmix/dataset.hpp"

#include <cstdlib>
#include <set>
#include <unordered_map>

#include <json.hpp>

namespace rrmix {

using nlohmann::json;

const char* kind_name(VariableKind k) {
  switch (k) {
    case VariableKind::Numeric: return "numeric";
    case VariableKind::Binary: return "binary";
    case VariableKind::Nominal: return "nominal";
    case VariableKind::Ordinal: return "ordinal";
  }
  return "?";
}

const char* role_name(Role r) { return r == Role::Predictor ? "predictor" : "response"; }

VariableKind kind_from_name(const std::string& s) {
  if (s == "numeric") return VariableKind::Numeric;
  if (s == "binary") return VariableKind::Binary;
  if (s == "nominal") return VariableKind::Nominal;
  if (s == "ordinal") return VariableKind::Ordinal;
  fail(errc::schema_mismatch, "unknown variable kind: " + s);
}

Role role_from_name(const std::string& s) {
  if (s == "predictor") return Role::Predictor;
  if (s == "response") return Role::Response;
  fail(errc::schema_mismatch, "unknown variable role: " + s);
}

bool is_input_error(const std::string& code) {
  static const std::set<std::string> input = {
      errc::constant_column,   errc::unknown_category, errc::dimension_mismatch,
      errc::invalid_penalty,   errc::invalid_family,   errc::schema_mismatch,
      errc::parse_error,       errc::io_error,         errc::invalid_argument,
  };
  return input.count(code) > 0;
}

std::vector<VariableSchema> MixedDataset::predictor_schema() const {
  std::vector<VariableSchema> out;
  out.reserve(predictors.size());
  for (const auto& c : predictors) out.push_back(c.schema);
  return out;
}

std::vector<VariableSchema> MixedDataset::response_schema() const {
  std::vector<VariableSchema> out;
  out.reserve(responses.size());
  for (const auto& c : responses) out.push_back(c.schema);
  return out;
}

void validate_schema(const std::vector<VariableSchema>& schema, bool require_responses) {
  if (schema.empty()) fail(errc::schema_mismatch, "schema has no variables");
  std::set<std::string> seen;
  bool any_response = false;
  for (const auto& v : schema) {
    if (v.name.empty()) fail(errc::schema_mismatch, "schema variable with empty name");
    if (!seen.insert(v.name).second)
      fail(errc::schema_mismatch, "duplicate schema variable: " + v.name);
    if (v.role == Role::Response) any_response = true;
    if (v.kind == VariableKind::Numeric) {
      if (!v.categories.empty())
        fail(errc::schema_mismatch, v.name + ": numeric variable with category list");
    } else {
      if (v.kind == VariableKind::Binary && v.n_categories() != 2)
        fail(errc::schema_mismatch, v.name + ": binary variable needs exactly 2 categories");
      if (v.kind != VariableKind::Binary && v.n_categories() < 2)
        fail(errc::schema_mismatch, v.name + ": discrete variable needs >= 2 categories");
      std::set<std::string> cats(v.categories.begin(), v.categories.end());
      if (static_cast<int>(cats.size()) != v.n_categories())
        fail(errc::schema_mismatch, v.name + ": duplicate category label");
    }
    if (v.role == Role::Response && v.kind == VariableKind::Nominal)
      fail(errc::invalid_family, v.name + ": nominal responses are not supported");
  }
  if (require_responses && !any_response)
    fail(errc::schema_mismatch, "schema declares no response variables");
}

static VariableSchema schema_entry_from_json(const json& j) {
  if (!j.is_object()) fail(errc::schema_mismatch, "schema entry is not an object");
  VariableSchema v;
  if (!j.contains("name") || !j["name"].is_string())
    fail(errc::schema_mismatch, "schema entry missing string 'name'");
  v.name = j["name"].get<std::string>();
  if (!j.contains("role")) fail(errc::schema_mismatch, v.name + ": missing 'role'");
  v.role = role_from_name(j["role"].get<std::string>());
  if (!j.contains("kind")) fail(errc::schema_mismatch, v.name + ": missing 'kind'");
  v.kind = kind_from_name(j["kind"].get<std::string>());
  if (j.contains("categories")) {
    for (const auto& c : j["categories"]) v.categories.push_back(c.get<std::string>());
  }
  return v;
}

std::vector<VariableSchema> schema_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    fail(errc::parse_error, std::string("schema JSON: ") + e.what());
  }
  const json* arr = &j;
  if (j.is_object() && j.contains("variables")) arr = &j["variables"];
  if (!arr->is_array()) fail(errc::schema_mismatch, "schema JSON must be an array of variables");
  std::vector<VariableSchema> out;
  for (const auto& e : *arr) out.push_back(schema_entry_from_json(e));
  validate_schema(out);
  return out;
}

std::vector<VariableSchema> read_schema_file(const std::string& path) {
  return schema_from_json(read_text_file(path));
}

std::string schema_to_json(const std::vector<VariableSchema>& schema) {
  json arr = json::array();
  for (const auto& v : schema) {
    json e;
    e["name"] = v.name;
    e["role"] = role_name(v.role);
    e["kind"] = kind_name(v.kind);
    if (!v.categories.empty()) e["categories"] = v.categories;
    arr.push_back(e);
  }
  return arr.dump(2);
}

static double parse_numeric_cell(const std::string& cell, const std::string& var, int row) {
  const char* s = cell.c_str();
  char* end = nullptr;
  double x = std::strtod(s, &end);
  while (end && *end == ' ') ++end;
  if (cell.empty() || end == s || (end && *end != '\0'))
    fail(errc::parse_error,
         var + ", row " + std::to_string(row + 1) + ": not a number: '" + cell + "'");
  return x;
}

MixedDataset bind_dataset(const CsvTable& table, const std::vector<VariableSchema>& schema,
                          bool require_responses) {
  validate_schema(schema, require_responses);
  MixedDataset data;
  data.n_rows = table.n_rows();
  for (const auto& v : schema) {
    int j = table.column_index(v.name);
    if (j < 0) fail(errc::schema_mismatch, "data is missing schema column: " + v.name);
    Column col;
    col.schema = v;
    if (v.kind == VariableKind::Numeric) {
      col.numeric.reserve(table.n_rows());
      for (int i = 0; i < table.n_rows(); ++i)
        col.numeric.push_back(parse_numeric_cell(table.rows[i][j], v.name, i));
    } else {
      std::unordered_map<std::string, int> lookup;
      for (int c = 0; c < v.n_categories(); ++c) lookup[v.categories[c]] = c + 1;
      col.category.reserve(table.n_rows());
      for (int i = 0; i < table.n_rows(); ++i) {
        auto it = lookup.find(table.rows[i][j]);
        if (it == lookup.end())
          fail(errc::unknown_category, v.name + ", row " + std::to_string(i + 1) +
                                           ": category '" + table.rows[i][j] +
                                           "' is not in the schema");
        col.category.push_back(it->second);
      }
    }
    (v.role == Role::Predictor ? data.predictors : data.responses).push_back(std::move(col));
  }
  if (data.predictors.empty()) fail(errc::schema_mismatch, "schema declares no predictors");
  return data;
}

MixedDataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
  return bind_dataset(read_csv_file(csv_path), read_schema_file(schema_path));
}

MixedDataset subset_rows(const MixedDataset& data, const std::vector<int>& rows) {
  MixedDataset out;
  out.n_rows = static_cast<int>(rows.size());
  auto take = [&](const Column& c) {
    Column s;
    s.schema = c.schema;
    if (c.schema.kind == VariableKind::Numeric) {
      s.numeric.reserve(rows.size());
      for (int i : rows) s.numeric.push_back(c.numeric[i]);
    } else {
      s.category.reserve(rows.size());
      for (int i : rows) s.category.push_back(c.category[i]);
    }
    return s;
  };
  for (const auto& c : data.predictors) out.predictors.push_back(take(c));
  for (const auto& c : data.responses) out.responses.push_back(take(c));
  return out;
}

}  // namespace rrmix
