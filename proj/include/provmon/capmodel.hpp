#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace provmon {

// Attribute data types. Order matches the alternatives of Value.
enum class DType : std::uint8_t { Int, Real, Bool, Str, List, Set, KeyValue, TimeSeries };

std::string_view to_string(DType t);
std::optional<DType> parse_dtype(std::string_view s);

struct AttributeSpec {
  std::string name;
  DType dtype = DType::Str;
  auto operator<=>(const AttributeSpec&) const = default;
};

enum class ImplClass : std::uint8_t { Existing, NewUser, NewKernel, NewHardware };

std::string_view to_string(ImplClass c);
std::optional<ImplClass> parse_impl_class(std::string_view s);

struct CapabilityTriple {
  std::string name;
  std::set<std::string> entities;
  std::set<AttributeSpec> attributes;
  std::set<std::string> events;
  ImplClass impl_class = ImplClass::Existing;
  double overhead = 0.1;  // normalized performance impact in [0,1]
};

struct TaskSpec {
  std::string name;
  std::set<std::string> entities;
  std::set<AttributeSpec> attributes;
  std::set<std::string> events;
  // Estimated overhead of a new collector for this task, optionally per
  // implementation class. Unset entries fall back to `overhead`.
  double overhead = 0.1;
  std::map<ImplClass, double> impl_overhead;

  double overhead_for(ImplClass c) const;
  // Equality on the symbolic triple and name; cost estimates are ignored.
  bool same_triple(const TaskSpec& o) const {
    return entities == o.entities && attributes == o.attributes && events == o.events;
  }
};

// Throws ConfigError when an invariant (non-empty sets, overhead range) fails.
void validate(const CapabilityTriple& c);
void validate(const TaskSpec& t);

// Component-wise containment of the task triple in the capability triple.
// Attributes match on exact (name, dtype) pairs.
bool matches(const TaskSpec& task, const CapabilityTriple& cap);

// 1 when some capability in the catalog matches the task, else 0.
int mu(const TaskSpec& task, std::span<const CapabilityTriple> catalog);

// ---------------------------------------------------------------------------
// Collected outputs

using ListValue = std::vector<std::string>;
using SetValue = std::set<std::string>;
using KeyValueValue = std::map<std::string, std::string>;
using TimeSeriesValue = std::vector<std::pair<std::int64_t, double>>;
using Value = std::variant<std::int64_t, double, bool, std::string, ListValue, SetValue, KeyValueValue,
                           TimeSeriesValue>;

inline DType dtype_of(const Value& v) { return static_cast<DType>(v.index()); }

using Record = std::map<std::string, Value>;

struct CollectedOutput {
  std::string subtask;
  std::vector<Record> records;
  bool operator==(const CollectedOutput&) const = default;
};

// Throws TypeError when a record lacks a declared attribute, carries an
// undeclared one, or has a mismatched dtype.
void validate_output(const CollectedOutput& out, const std::set<AttributeSpec>& schema);

nlohmann::ordered_json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j, DType dtype);
nlohmann::ordered_json output_to_json(const CollectedOutput& out);
// Decodes records using the schema for dtypes.
CollectedOutput output_from_json(const nlohmann::json& j, const std::set<AttributeSpec>& schema);

// ---------------------------------------------------------------------------
// Integration expressions

enum class Op : std::uint8_t {
  Ref,  // leaf: a subtask's output stream
  Const,
  And,
  Or,
  Not,
  In,
  Subset,
  Union,
  Intersect,
  Match,
  Concat,
  Split,
  Contains,
  Gt,
  Lt,
  Eq,
  Sum,
  Avg,
  NameJoin,
};

std::string_view to_string(Op op);
std::optional<Op> parse_op(std::string_view s);

struct IntegrationExpr {
  Op op = Op::Ref;
  std::vector<IntegrationExpr> children;
  std::string ref;      // Ref: subtask name
  std::string binding;  // Ref: capability name or "new:<subtask>"; empty when unbound
  std::optional<Value> literal;               // Const
  std::map<std::string, std::string> params;  // field, text_field, name_field, delimiter

  static IntegrationExpr leaf(std::string subtask);
  static IntegrationExpr constant(Value v);
  static IntegrationExpr apply(Op op, std::vector<IntegrationExpr> children,
                               std::map<std::string, std::string> params = {});

  bool operator==(const IntegrationExpr&) const = default;

  // Names of all Ref leaves, first-seen order.
  std::vector<std::string> refs() const;
};

// Throws TypeError on arity violations anywhere in the tree.
void validate_arity(const IntegrationExpr& e);

nlohmann::ordered_json expr_to_json(const IntegrationExpr& e);
IntegrationExpr expr_from_json(const nlohmann::json& j);

// Scalars come back as a single record {"value": v}; streams come back as-is.
using StreamResolver = std::function<CollectedOutput(const std::string& subtask)>;
CollectedOutput eval_integration(const IntegrationExpr& expr, const StreamResolver& resolve);
CollectedOutput eval_integration(const IntegrationExpr& expr,
                                 const std::map<std::string, CollectedOutput>& outputs);

// Records of `cmds` whose text field contains, as a case-sensitive
// substring, the name field of at least one record of `vars`. Input order
// is kept; each command appears at most once.
CollectedOutput lambda_name(const CollectedOutput& cmds, const CollectedOutput& vars,
                            std::string_view text_field = "cmd_str",
                            std::string_view name_field = "var_name");

// Full-string glob with '*' and '?'.
bool glob_match(std::string_view text, std::string_view pattern);

// ---------------------------------------------------------------------------
// Catalog and task documents

CapabilityTriple capability_from_json(const nlohmann::json& j);
TaskSpec task_from_json(const nlohmann::json& j);
nlohmann::ordered_json capability_to_json(const CapabilityTriple& c);
nlohmann::ordered_json task_to_json(const TaskSpec& t);

// Accepts a JSON array, an object with a "catalog" array, or JSON lines.
std::vector<CapabilityTriple> parse_catalog(std::string_view text);
TaskSpec parse_task(std::string_view text);

}  // namespace provmon
