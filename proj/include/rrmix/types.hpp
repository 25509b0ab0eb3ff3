#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rrmix {

enum class VariableKind { Numeric, Binary, Nominal, Ordinal };
enum class Role { Predictor, Response };

inline bool is_discrete(VariableKind k) { return k != VariableKind::Numeric; }

const char* kind_name(VariableKind k);
const char* role_name(Role r);
VariableKind kind_from_name(const std::string& s);
Role role_from_name(const std::string& s);

struct VariableSchema {
  std::string name;
  Role role = Role::Predictor;
  VariableKind kind = VariableKind::Numeric;
  std::vector<std::string> categories;  // ordered; empty for numeric

  int n_categories() const { return static_cast<int>(categories.size()); }
};

// All failures carry a stable machine-readable code (used verbatim in the
// CLI's error JSON) plus a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
  throw Error(code, message);
}

namespace errc {
inline constexpr const char* constant_column = "ConstantColumn";
inline constexpr const char* unknown_category = "UnknownCategory";
inline constexpr const char* dimension_mismatch = "DimensionMismatch";
inline constexpr const char* degenerate_quantification = "DegenerateQuantification";
inline constexpr const char* invalid_penalty = "InvalidPenaltyCombination";
inline constexpr const char* invalid_family = "InvalidFamily";
inline constexpr const char* singular_system = "SingularSystem";
inline constexpr const char* degenerate_svd = "DegenerateSVD";
inline constexpr const char* non_decreasing_loss = "NonDecreasingLoss";
inline constexpr const char* empty_feasible_set = "EmptyFeasibleSet";
inline constexpr const char* fit_failure = "FitFailure";
inline constexpr const char* schema_mismatch = "SchemaMismatch";
inline constexpr const char* parse_error = "ParseError";
inline constexpr const char* io_error = "IOError";
inline constexpr const char* invalid_argument = "InvalidArgument";
}  // namespace errc

// Input-shaped errors exit the CLI with status 2; everything else is 1.
bool is_input_error(const std::string& code);

}  // namespace rrmix
