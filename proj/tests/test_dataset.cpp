#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "rrmix/dataset.hpp"

using namespace rrmix;
using test_helpers::make_var;

namespace {

std::string demo_schema_json() {
  return R"([
    {"name": "age", "role": "predictor", "kind": "numeric"},
    {"name": "sex", "role": "predictor", "kind": "binary", "categories": ["f", "m"]},
    {"name": "grade", "role": "response", "kind": "ordinal", "categories": ["lo", "mid", "hi"]}
  ])";
}

}  // namespace

TEST_CASE("schema_from_json reads roles, kinds and categories") {
  auto schema = schema_from_json(demo_schema_json());
  REQUIRE(schema.size() == 3);
  CHECK(schema[0].kind == VariableKind::Numeric);
  CHECK(schema[1].role == Role::Predictor);
  CHECK(schema[1].categories == std::vector<std::string>{"f", "m"});
  CHECK(schema[2].role == Role::Response);
  CHECK(schema[2].n_categories() == 3);
}

TEST_CASE("schema_from_json accepts the wrapped {variables: []} form") {
  auto schema = schema_from_json("{\"variables\": " + demo_schema_json() + "}");
  CHECK(schema.size() == 3);
}

TEST_CASE("schema_to_json round-trips") {
  auto schema = schema_from_json(demo_schema_json());
  auto again = schema_from_json(schema_to_json(schema));
  REQUIRE(again.size() == schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    CHECK(again[i].name == schema[i].name);
    CHECK(again[i].role == schema[i].role);
    CHECK(again[i].kind == schema[i].kind);
    CHECK(again[i].categories == schema[i].categories);
  }
}

TEST_CASE("validate_schema rejects malformed declarations") {
  auto check_code = [](std::vector<VariableSchema> s, const std::string& code,
                       bool require_responses = true) {
    try {
      validate_schema(s, require_responses);
      FAIL("expected failure with code " << code);
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };

  check_code({}, errc::schema_mismatch);
  check_code({make_var("x", Role::Predictor, VariableKind::Numeric),
              make_var("x", Role::Response, VariableKind::Numeric)},
             errc::schema_mismatch);
  check_code({make_var("b", Role::Predictor, VariableKind::Binary, 3),
              make_var("y", Role::Response, VariableKind::Numeric)},
             errc::schema_mismatch);
  check_code({make_var("o", Role::Predictor, VariableKind::Ordinal, 1),
              make_var("y", Role::Response, VariableKind::Numeric)},
             errc::schema_mismatch);
  check_code({make_var("x", Role::Predictor, VariableKind::Numeric),
              make_var("y", Role::Response, VariableKind::Nominal, 3)},
             errc::invalid_family);
  check_code({make_var("x", Role::Predictor, VariableKind::Numeric)}, errc::schema_mismatch);

  // predictors-only schemas are fine when responses are not required
  std::vector<VariableSchema> pred_only = {make_var("x", Role::Predictor, VariableKind::Numeric)};
  CHECK_NOTHROW(validate_schema(pred_only, false));
}

TEST_CASE("bind_dataset maps cells and validates categories") {
  auto schema = schema_from_json(demo_schema_json());
  CsvTable t = parse_csv("age,sex,grade,ignored\n31,f,lo,zz\n44,m,hi,zz\n");
  MixedDataset data = bind_dataset(t, schema);
  CHECK(data.n_rows == 2);
  REQUIRE(data.n_predictors() == 2);
  REQUIRE(data.n_responses() == 1);
  CHECK(data.predictors[0].numeric[1] == doctest::Approx(44.0));
  CHECK(data.predictors[1].category[0] == 1);
  CHECK(data.predictors[1].category[1] == 2);
  CHECK(data.responses[0].category[1] == 3);

  // out-of-schema category label
  CsvTable bad = parse_csv("age,sex,grade\n31,f,nope\n");
  try {
    bind_dataset(bad, schema);
    FAIL("expected UnknownCategory");
  } catch (const Error& e) {
    CHECK(e.code() == errc::unknown_category);
  }

  // unparseable numeric cell
  CsvTable bad_num = parse_csv("age,sex,grade\nx31,f,lo\n");
  try {
    bind_dataset(bad_num, schema);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == errc::parse_error);
  }

  // missing schema column
  CsvTable missing = parse_csv("age,grade\n31,lo\n");
  try {
    bind_dataset(missing, schema);
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == errc::schema_mismatch);
  }
}

TEST_CASE("bind_dataset can skip the response requirement for scoring data") {
  auto schema = schema_from_json(demo_schema_json());
  std::vector<VariableSchema> preds(schema.begin(), schema.begin() + 2);
  CsvTable t = parse_csv("age,sex\n31,f\n");
  MixedDataset data = bind_dataset(t, preds, false);
  CHECK(data.n_responses() == 0);
  CHECK(data.n_rows == 1);
}

TEST_CASE("subset_rows keeps order and repeats") {
  test_helpers::DatasetShape shape;
  shape.n = 10;
  MixedDataset data = test_helpers::random_mixed_dataset(shape, 7);
  MixedDataset sub = subset_rows(data, {3, 3, 0});
  CHECK(sub.n_rows == 3);
  CHECK(sub.predictors[0].numeric[0] == data.predictors[0].numeric[3]);
  CHECK(sub.predictors[0].numeric[1] == data.predictors[0].numeric[3]);
  CHECK(sub.predictors[0].numeric[2] == data.predictors[0].numeric[0]);
  CHECK(sub.responses.back().category[2] == data.responses.back().category[0]);
}

TEST_CASE("input error classification drives CLI exit codes") {
  CHECK(is_input_error(errc::unknown_category));
  CHECK(is_input_error(errc::schema_mismatch));
  CHECK(is_input_error(errc::parse_error));
  CHECK(is_input_error(errc::invalid_penalty));
  CHECK(is_input_error(errc::constant_column));
  CHECK_FALSE(is_input_error(errc::singular_system));
  CHECK_FALSE(is_input_error(errc::non_decreasing_loss));
  CHECK_FALSE(is_input_error(errc::fit_failure));
}
