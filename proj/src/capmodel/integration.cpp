#include <algorithm>
#include <array>

#include "provmon/capmodel.hpp"
#include "provmon/error.hpp"

namespace provmon {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

struct OpInfo {
  Op op;
  std::string_view name;
  int min_arity;
  int max_arity;
};

constexpr std::array<OpInfo, 19> kOps = {{
    {Op::Ref, "ref", 0, 0},
    {Op::Const, "const", 0, 0},
    {Op::And, "and", 2, 2},
    {Op::Or, "or", 2, 2},
    {Op::Not, "not", 1, 1},
    {Op::In, "in", 2, 2},
    {Op::Subset, "subset", 2, 2},
    {Op::Union, "union", 2, 2},
    {Op::Intersect, "intersect", 2, 2},
    {Op::Match, "match", 2, 2},
    {Op::Concat, "concat", 2, 2},
    {Op::Split, "split", 1, 2},
    {Op::Contains, "contains", 2, 2},
    {Op::Gt, "gt", 2, 2},
    {Op::Lt, "lt", 2, 2},
    {Op::Eq, "eq", 2, 2},
    {Op::Sum, "sum", 1, 1},
    {Op::Avg, "avg", 1, 1},
    {Op::NameJoin, "name_join", 2, 2},
}};

const OpInfo& info(Op op) { return kOps.at(static_cast<std::size_t>(op)); }

}  // namespace

std::string_view to_string(Op op) { return info(op).name; }

std::optional<Op> parse_op(std::string_view s) {
  for (const auto& i : kOps)
    if (i.name == s) return i.op;
  return std::nullopt;
}

IntegrationExpr IntegrationExpr::leaf(std::string subtask) {
  IntegrationExpr e;
  e.op = Op::Ref;
  e.ref = std::move(subtask);
  return e;
}

IntegrationExpr IntegrationExpr::constant(Value v) {
  IntegrationExpr e;
  e.op = Op::Const;
  e.literal = std::move(v);
  return e;
}

IntegrationExpr IntegrationExpr::apply(Op op, std::vector<IntegrationExpr> children,
                                       std::map<std::string, std::string> params) {
  IntegrationExpr e;
  e.op = op;
  e.children = std::move(children);
  e.params = std::move(params);
  validate_arity(e);
  return e;
}

std::vector<std::string> IntegrationExpr::refs() const {
  std::vector<std::string> out;
  auto walk = [&](const IntegrationExpr& e, auto&& self) -> void {
    if (e.op == Op::Ref && std::find(out.begin(), out.end(), e.ref) == out.end()) out.push_back(e.ref);
    for (const auto& c : e.children) self(c, self);
  };
  walk(*this, walk);
  return out;
}

void validate_arity(const IntegrationExpr& e) {
  const auto& i = info(e.op);
  const int n = static_cast<int>(e.children.size());
  if (n < i.min_arity || n > i.max_arity)
    throw TypeError("operator " + std::string(i.name) + " takes " + std::to_string(i.min_arity) +
                    (i.min_arity == i.max_arity ? "" : ".." + std::to_string(i.max_arity)) + " operands, got " +
                    std::to_string(n));
  if (e.op == Op::Ref && e.ref.empty()) throw TypeError("ref leaf without a subtask name");
  if (e.op == Op::Const && !e.literal) throw TypeError("const leaf without a value");
  for (const auto& c : e.children) validate_arity(c);
}

ojson expr_to_json(const IntegrationExpr& e) {
  ojson j;
  j["op"] = to_string(e.op);
  if (e.op == Op::Ref) {
    j["ref"] = e.ref;
    if (!e.binding.empty()) j["binding"] = e.binding;
    return j;
  }
  if (e.op == Op::Const) {
    j["dtype"] = to_string(dtype_of(*e.literal));
    j["value"] = value_to_json(*e.literal);
    return j;
  }
  if (!e.params.empty()) j["params"] = e.params;
  ojson args = ojson::array();
  for (const auto& c : e.children) args.push_back(expr_to_json(c));
  j["args"] = std::move(args);
  return j;
}

IntegrationExpr expr_from_json(const json& j) {
  try {
    auto opname = j.at("op").get<std::string>();
    auto op = parse_op(opname);
    if (!op) throw TypeError("unknown operator \"" + opname + "\"");
    IntegrationExpr e;
    e.op = *op;
    if (e.op == Op::Ref) {
      e.ref = j.at("ref").get<std::string>();
      e.binding = j.value("binding", "");
    } else if (e.op == Op::Const) {
      auto dt = parse_dtype(j.at("dtype").get<std::string>());
      if (!dt) throw TypeError("const: unknown dtype");
      e.literal = value_from_json(j.at("value"), *dt);
    } else {
      if (auto it = j.find("params"); it != j.end()) e.params = it->get<std::map<std::string, std::string>>();
      for (const auto& c : j.at("args")) e.children.push_back(expr_from_json(c));
    }
    validate_arity(e);
    return e;
  } catch (const json::exception& ex) {
    throw TypeError(std::string("integration expression: ") + ex.what());
  }
}

bool glob_match(std::string_view text, std::string_view pattern) {
  std::size_t t = 0, p = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++t;
      ++p;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

CollectedOutput lambda_name(const CollectedOutput& cmds, const CollectedOutput& vars, std::string_view text_field,
                            std::string_view name_field) {
  auto str_of = [](const Record& r, std::string_view field, const std::string& who) -> const std::string& {
    auto it = r.find(std::string(field));
    if (it == r.end()) throw TypeError(who + ": record lacks field '" + std::string(field) + "'");
    if (auto s = std::get_if<std::string>(&it->second)) return *s;
    throw TypeError(who + ": field '" + std::string(field) + "' must be Str");
  };
  std::vector<const std::string*> names;
  names.reserve(vars.records.size());
  for (const auto& r : vars.records) names.push_back(&str_of(r, name_field, "name_join vars"));

  CollectedOutput out;
  out.subtask = cmds.subtask;
  for (const auto& r : cmds.records) {
    const auto& text = str_of(r, text_field, "name_join cmds");
    bool hit = std::any_of(names.begin(), names.end(),
                           [&](const std::string* n) { return text.find(*n) != std::string::npos; });
    if (hit) out.records.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluator

namespace {

using Datum = std::variant<CollectedOutput, Value>;

bool is_stream(const Datum& d) { return d.index() == 0; }

const CollectedOutput& stream(const Datum& d, Op op) {
  if (!is_stream(d)) throw TypeError(std::string(to_string(op)) + ": expected a record stream operand");
  return std::get<CollectedOutput>(d);
}

const Value& scalar(const Datum& d, Op op) {
  if (is_stream(d)) throw TypeError(std::string(to_string(op)) + ": expected a scalar operand");
  return std::get<Value>(d);
}

bool as_bool(const Datum& d, Op op) {
  const auto& v = scalar(d, op);
  if (auto b = std::get_if<bool>(&v)) return *b;
  throw TypeError(std::string(to_string(op)) + ": expected Bool, got " + std::string(to_string(dtype_of(v))));
}

const std::string& as_str(const Value& v, Op op) {
  if (auto s = std::get_if<std::string>(&v)) return *s;
  throw TypeError(std::string(to_string(op)) + ": expected Str, got " + std::string(to_string(dtype_of(v))));
}

bool is_numeric(const Value& v) { return dtype_of(v) == DType::Int || dtype_of(v) == DType::Real; }

double as_number(const Value& v, Op op) {
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto r = std::get_if<double>(&v)) return *r;
  throw TypeError(std::string(to_string(op)) + ": expected a numeric value, got " +
                  std::string(to_string(dtype_of(v))));
}

const std::string& field_param(const IntegrationExpr& e) {
  auto it = e.params.find("field");
  if (it == e.params.end())
    throw TypeError(std::string(to_string(e.op)) + ": stream operand requires a 'field' parameter");
  return it->second;
}

const Value& field_of(const Record& r, const std::string& field, Op op) {
  auto it = r.find(field);
  if (it == r.end()) throw TypeError(std::string(to_string(op)) + ": record lacks field '" + field + "'");
  return it->second;
}

bool contains_record(const std::vector<Record>& rs, const Record& r) {
  return std::find(rs.begin(), rs.end(), r) != rs.end();
}

// Binary scalar predicate; the stream form filters records on `field`.
bool scalar_predicate(Op op, const Value& a, const Value& b) {
  switch (op) {
    case Op::Match:
      return glob_match(as_str(a, op), as_str(b, op));
    case Op::Contains: {
      const auto& needle = as_str(b, op);
      if (auto s = std::get_if<std::string>(&a)) return s->find(needle) != std::string::npos;
      if (auto l = std::get_if<ListValue>(&a)) return std::find(l->begin(), l->end(), needle) != l->end();
      if (auto s = std::get_if<SetValue>(&a)) return s->count(needle) > 0;
      if (auto kv = std::get_if<KeyValueValue>(&a)) return kv->count(needle) > 0;
      throw TypeError("contains: unsupported left operand " + std::string(to_string(dtype_of(a))));
    }
    case Op::Gt:
      return as_number(a, op) > as_number(b, op);
    case Op::Lt:
      return as_number(a, op) < as_number(b, op);
    case Op::Eq:
      if (is_numeric(a) && is_numeric(b)) return as_number(a, op) == as_number(b, op);
      if (dtype_of(a) != dtype_of(b))
        throw TypeError("eq: dtype mismatch " + std::string(to_string(dtype_of(a))) + " vs " +
                        std::string(to_string(dtype_of(b))));
      return a == b;
    default:
      throw TypeError("not a predicate operator");
  }
}

Datum eval(const IntegrationExpr& e, const StreamResolver& resolve) {
  switch (e.op) {
    case Op::Ref:
      return resolve(e.ref);
    case Op::Const:
      return *e.literal;
    default:
      break;
  }
  std::vector<Datum> args;
  args.reserve(e.children.size());
  for (const auto& c : e.children) args.push_back(eval(c, resolve));

  switch (e.op) {
    case Op::And:
      return Value{as_bool(args[0], e.op) && as_bool(args[1], e.op)};
    case Op::Or:
      return Value{as_bool(args[0], e.op) || as_bool(args[1], e.op)};
    case Op::Not:
      return Value{!as_bool(args[0], e.op)};

    case Op::In: {
      const auto& x = scalar(args[0], e.op);
      if (is_stream(args[1])) {
        const auto& field = field_param(e);
        const auto& rs = std::get<CollectedOutput>(args[1]).records;
        return Value{std::any_of(rs.begin(), rs.end(), [&](const Record& r) {
          auto it = r.find(field);
          return it != r.end() && it->second == x;
        })};
      }
      const auto& coll = std::get<Value>(args[1]);
      const auto& key = as_str(x, e.op);
      if (auto l = std::get_if<ListValue>(&coll)) return Value{std::find(l->begin(), l->end(), key) != l->end()};
      if (auto s = std::get_if<SetValue>(&coll)) return Value{s->count(key) > 0};
      throw TypeError("in: right operand must be List, Set or a record stream");
    }

    case Op::Subset: {
      if (is_stream(args[0]) && is_stream(args[1])) {
        const auto& l = std::get<CollectedOutput>(args[0]).records;
        const auto& r = std::get<CollectedOutput>(args[1]).records;
        return Value{std::all_of(l.begin(), l.end(), [&](const Record& x) { return contains_record(r, x); })};
      }
      auto to_set = [&](const Value& v) -> SetValue {
        if (auto l = std::get_if<ListValue>(&v)) return SetValue(l->begin(), l->end());
        if (auto s = std::get_if<SetValue>(&v)) return *s;
        throw TypeError("subset: operands must be List/Set or record streams");
      };
      auto a = to_set(scalar(args[0], e.op));
      auto b = to_set(scalar(args[1], e.op));
      return Value{std::includes(b.begin(), b.end(), a.begin(), a.end())};
    }

    case Op::Union:
    case Op::Intersect: {
      if (!is_stream(args[0]) && !is_stream(args[1])) {
        const auto* a = std::get_if<SetValue>(&std::get<Value>(args[0]));
        const auto* b = std::get_if<SetValue>(&std::get<Value>(args[1]));
        if (!a || !b) throw TypeError(std::string(to_string(e.op)) + ": scalar operands must both be Set");
        SetValue out;
        if (e.op == Op::Union) {
          std::set_union(a->begin(), a->end(), b->begin(), b->end(), std::inserter(out, out.end()));
        } else {
          std::set_intersection(a->begin(), a->end(), b->begin(), b->end(), std::inserter(out, out.end()));
        }
        return Value{out};
      }
      const auto& l = stream(args[0], e.op);
      const auto& r = stream(args[1], e.op);
      CollectedOutput out;
      out.subtask = l.subtask;
      if (e.op == Op::Union) {
        for (const auto* side : {&l.records, &r.records})
          for (const auto& rec : *side)
            if (!contains_record(out.records, rec)) out.records.push_back(rec);
      } else {
        for (const auto& rec : l.records)
          if (contains_record(r.records, rec) && !contains_record(out.records, rec)) out.records.push_back(rec);
      }
      return out;
    }

    case Op::Match:
    case Op::Contains:
    case Op::Gt:
    case Op::Lt:
    case Op::Eq: {
      const auto& rhs = scalar(args[1], e.op);
      if (is_stream(args[0])) {
        const auto& field = field_param(e);
        const auto& in = std::get<CollectedOutput>(args[0]);
        CollectedOutput out;
        out.subtask = in.subtask;
        for (const auto& rec : in.records)
          if (scalar_predicate(e.op, field_of(rec, field, e.op), rhs)) out.records.push_back(rec);
        return out;
      }
      return Value{scalar_predicate(e.op, std::get<Value>(args[0]), rhs)};
    }

    case Op::Concat: {
      const auto& a = scalar(args[0], e.op);
      const auto& b = scalar(args[1], e.op);
      if (dtype_of(a) == DType::Str && dtype_of(b) == DType::Str)
        return Value{std::get<std::string>(a) + std::get<std::string>(b)};
      if (dtype_of(a) == DType::List && dtype_of(b) == DType::List) {
        auto out = std::get<ListValue>(a);
        const auto& tail = std::get<ListValue>(b);
        out.insert(out.end(), tail.begin(), tail.end());
        return Value{out};
      }
      throw TypeError("concat: operands must both be Str or both be List");
    }

    case Op::Split: {
      const auto& s = as_str(scalar(args[0], e.op), e.op);
      std::string delim = " ";
      if (args.size() == 2) {
        delim = as_str(scalar(args[1], e.op), e.op);
      } else if (auto it = e.params.find("delimiter"); it != e.params.end()) {
        delim = it->second;
      }
      if (delim.empty()) throw TypeError("split: empty delimiter");
      ListValue parts;
      std::size_t start = 0;
      for (;;) {
        auto pos = s.find(delim, start);
        parts.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + delim.size();
      }
      return Value{parts};
    }

    case Op::Sum:
    case Op::Avg: {
      std::vector<Value> items;
      if (is_stream(args[0])) {
        const auto& field = field_param(e);
        for (const auto& rec : std::get<CollectedOutput>(args[0]).records)
          items.push_back(field_of(rec, field, e.op));
      } else if (auto ts = std::get_if<TimeSeriesValue>(&std::get<Value>(args[0]))) {
        for (const auto& [t, y] : *ts) items.emplace_back(y);
      } else {
        throw TypeError(std::string(to_string(e.op)) + ": operand must be a record stream or TimeSeries");
      }
      bool all_int = true;
      std::int64_t isum = 0;
      double rsum = 0.0;
      for (const auto& v : items) {
        if (!is_numeric(v))
          throw TypeError(std::string(to_string(e.op)) + " over " + std::string(to_string(dtype_of(v))));
        if (auto i = std::get_if<std::int64_t>(&v)) {
          isum += *i;
        } else {
          all_int = false;
        }
        rsum += as_number(v, e.op);
      }
      if (e.op == Op::Sum) return all_int ? Value{isum} : Value{rsum};
      if (items.empty()) throw TypeError("avg over an empty collection");
      return Value{rsum / static_cast<double>(items.size())};
    }

    case Op::NameJoin: {
      auto tf = e.params.count("text_field") ? e.params.at("text_field") : std::string("cmd_str");
      auto nf = e.params.count("name_field") ? e.params.at("name_field") : std::string("var_name");
      return lambda_name(stream(args[0], e.op), stream(args[1], e.op), tf, nf);
    }

    default:
      throw TypeError("unhandled operator " + std::string(to_string(e.op)));
  }
}

}  // namespace

CollectedOutput eval_integration(const IntegrationExpr& expr, const StreamResolver& resolve) {
  validate_arity(expr);
  Datum d = eval(expr, resolve);
  if (is_stream(d)) return std::get<CollectedOutput>(std::move(d));
  CollectedOutput out;
  out.subtask = "value";
  out.records.push_back(Record{{"value", std::get<Value>(d)}});
  return out;
}

CollectedOutput eval_integration(const IntegrationExpr& expr, const std::map<std::string, CollectedOutput>& outputs) {
  return eval_integration(expr, [&](const std::string& name) -> CollectedOutput {
    auto it = outputs.find(name);
    if (it == outputs.end()) throw ReferenceError("unresolved subtask output \"" + name + "\"");
    return it->second;
  });
}

}  // namespace provmon
