#pragma once

#include <string>
#include <vector>

#include "rrmix/csv.hpp"
#include "rrmix/types.hpp"

namespace rrmix {

// One observed variable. Numeric columns use `numeric`; binary, nominal and
// ordinal columns use `category` with 1-based indices into schema.categories.
struct Column {
  VariableSchema schema;
  std::vector<double> numeric;
  std::vector<int> category;

  int size() const {
    return static_cast<int>(schema.kind == VariableKind::Numeric ? numeric.size()
                                                                 : category.size());
  }
};

struct MixedDataset {
  int n_rows = 0;
  std::vector<Column> predictors;
  std::vector<Column> responses;

  int n_predictors() const { return static_cast<int>(predictors.size()); }
  int n_responses() const { return static_cast<int>(responses.size()); }
  std::vector<VariableSchema> predictor_schema() const;
  std::vector<VariableSchema> response_schema() const;
};

// Sidecar schema: JSON array (or {"variables": [...]}) of records with
// name, role ("predictor"/"response"), kind ("numeric"/"binary"/"nominal"/
// "ordinal") and, for discrete kinds, the ordered category list.
std::vector<VariableSchema> schema_from_json(const std::string& json_text);
std::vector<VariableSchema> read_schema_file(const std::string& path);
std::string schema_to_json(const std::vector<VariableSchema>& schema);

// Binds a parsed CSV to a schema. Every schema variable must match a CSV
// header column; unlisted CSV columns are ignored. Cells of discrete
// variables must equal one of the declared category labels exactly.
MixedDataset bind_dataset(const CsvTable& table, const std::vector<VariableSchema>& schema,
                          bool require_responses = true);
MixedDataset load_dataset(const std::string& csv_path, const std::string& schema_path);

MixedDataset subset_rows(const MixedDataset& data, const std::vector<int>& rows);

void validate_schema(const std::vector<VariableSchema>& schema,
                     bool require_responses = true);

}  // namespace rrmix
