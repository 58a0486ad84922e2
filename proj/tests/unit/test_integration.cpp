#include <random>

#include "doctest.h"
#include "provmon/capmodel.hpp"
#include "provmon/error.hpp"

using namespace provmon;
using E = IntegrationExpr;

namespace {

Value eval_value(const E& e) {
  const auto out = eval_integration(e, std::map<std::string, CollectedOutput>{});
  REQUIRE(out.records.size() == 1);
  return out.records[0].at("value");
}

CollectedOutput stream(const std::string& name, std::vector<Record> records) { return {name, std::move(records)}; }

Record cmd(std::int64_t pid, const std::string& text) {
  return {{"pid", Value{pid}}, {"cmd_str", Value{text}}, {"timestamp", Value{std::int64_t{pid * 10}}}};
}

Record var(const std::string& name) { return {{"var_name", Value{name}}}; }

}  // namespace

TEST_SUITE("integration") {
  TEST_CASE("boolean and comparison operators") {
    const auto t = E::constant(Value{true});
    const auto f = E::constant(Value{false});
    CHECK(std::get<bool>(eval_value(E::apply(Op::And, {t, f}))) == false);
    CHECK(std::get<bool>(eval_value(E::apply(Op::Or, {t, f}))) == true);
    CHECK(std::get<bool>(eval_value(E::apply(Op::Not, {f}))) == true);
    const auto two = E::constant(Value{std::int64_t{2}});
    const auto half = E::constant(Value{2.5});
    CHECK(std::get<bool>(eval_value(E::apply(Op::Gt, {half, two}))) == true);
    CHECK(std::get<bool>(eval_value(E::apply(Op::Lt, {half, two}))) == false);
    CHECK(std::get<bool>(eval_value(E::apply(Op::Eq, {two, E::constant(Value{2.0})}))) == true);
    CHECK_THROWS_AS(eval_value(E::apply(Op::Eq, {two, E::constant(Value{std::string("2")})})), TypeError);
    CHECK_THROWS_AS(eval_value(E::apply(Op::And, {t, two})), TypeError);
  }

  TEST_CASE("string and collection operators") {
    const auto s = E::constant(Value{std::string("export LD_PRELOAD=/tmp/x.so")});
    CHECK(std::get<bool>(eval_value(E::apply(Op::Match, {s, E::constant(Value{std::string("export *=*")})}))));
    CHECK_FALSE(std::get<bool>(eval_value(E::apply(Op::Match, {s, E::constant(Value{std::string("unset ?")})}))));
    CHECK(std::get<bool>(eval_value(E::apply(Op::Contains, {s, E::constant(Value{std::string("PRELOAD")})}))));
    const auto parts = eval_value(E::apply(Op::Split, {s}));
    CHECK(std::get<ListValue>(parts) == ListValue{"export", "LD_PRELOAD=/tmp/x.so"});
    const auto kv = eval_value(E::apply(Op::Split, {s}, {{"delimiter", "="}}));
    CHECK(std::get<ListValue>(kv).size() == 2);
    const auto joined = eval_value(
        E::apply(Op::Concat, {E::constant(Value{std::string("ab")}), E::constant(Value{std::string("cd")})}));
    CHECK(std::get<std::string>(joined) == "abcd");
    const auto a = E::constant(Value{SetValue{"x", "y"}});
    const auto b = E::constant(Value{SetValue{"y", "z"}});
    CHECK(std::get<SetValue>(eval_value(E::apply(Op::Union, {a, b}))) == SetValue{"x", "y", "z"});
    CHECK(std::get<SetValue>(eval_value(E::apply(Op::Intersect, {a, b}))) == SetValue{"y"});
    CHECK(std::get<bool>(eval_value(E::apply(Op::Subset, {E::constant(Value{ListValue{"y"}}), a}))));
    CHECK(std::get<bool>(eval_value(E::apply(Op::In, {E::constant(Value{std::string("z")}), b}))));
  }

  TEST_CASE("glob matching") {
    CHECK(glob_match("", ""));
    CHECK(glob_match("abc", "a*"));
    CHECK(glob_match("abc", "*c"));
    CHECK(glob_match("abc", "a?c"));
    CHECK_FALSE(glob_match("abc", "a?"));
    CHECK(glob_match("aXbXc", "*b*c"));
    CHECK_FALSE(glob_match("abc", "abcd"));
  }

  TEST_CASE("arity violations are type errors") {
    CHECK_THROWS_AS(E::apply(Op::Not, {}), TypeError);
    CHECK_THROWS_AS(E::apply(Op::And, {E::constant(Value{true})}), TypeError);
    CHECK_THROWS_AS(E::apply(Op::Split, {E::leaf("a"), E::leaf("b"), E::leaf("c")}), TypeError);
    E bad;
    bad.op = Op::Sum;
    CHECK_THROWS_AS(validate_arity(bad), TypeError);
    CHECK_THROWS_AS(expr_from_json(nlohmann::json::parse(R"({"op":"avg","args":[]})")), TypeError);
  }

  TEST_CASE("stream filters need a field parameter") {
    std::map<std::string, CollectedOutput> outs = {{"c", stream("c", {cmd(1, "ls"), cmd(7, "id")})}};
    const auto gt = E::apply(Op::Gt, {E::leaf("c"), E::constant(Value{std::int64_t{3}})}, {{"field", "pid"}});
    const auto r = eval_integration(gt, outs);
    REQUIRE(r.records.size() == 1);
    CHECK(std::get<std::int64_t>(r.records[0].at("pid")) == 7);
    const auto nofield = E::apply(Op::Gt, {E::leaf("c"), E::constant(Value{std::int64_t{3}})});
    CHECK_THROWS_AS(eval_integration(nofield, outs), TypeError);
    const auto sum = eval_integration(E::apply(Op::Sum, {E::leaf("c")}, {{"field", "pid"}}), outs);
    CHECK(std::get<std::int64_t>(sum.records[0].at("value")) == 8);
    const auto avg = eval_integration(E::apply(Op::Avg, {E::leaf("c")}, {{"field", "pid"}}), outs);
    CHECK(std::get<double>(avg.records[0].at("value")) == 4.0);
    outs["e"] = stream("e", {});
    CHECK_THROWS_AS(eval_integration(E::apply(Op::Avg, {E::leaf("e")}, {{"field", "pid"}}), outs), TypeError);
    CHECK(std::get<std::int64_t>(
              eval_integration(E::apply(Op::Sum, {E::leaf("e")}, {{"field", "pid"}}), outs).records[0].at("value")) ==
          0);
  }

  TEST_CASE("union and intersect of streams dedupe records") {
    std::map<std::string, CollectedOutput> outs = {{"a", stream("a", {cmd(1, "x"), cmd(2, "y"), cmd(1, "x")})},
                                                   {"b", stream("b", {cmd(2, "y"), cmd(3, "z")})}};
    CHECK(eval_integration(E::apply(Op::Union, {E::leaf("a"), E::leaf("b")}), outs).records.size() == 3);
    CHECK(eval_integration(E::apply(Op::Intersect, {E::leaf("a"), E::leaf("b")}), outs).records.size() == 1);
  }

  TEST_CASE("name join matches a brute-force double loop") {
    std::mt19937_64 rng(3);
    const std::vector<std::string> names = {"PATH", "HOME", "LD_PRELOAD", "PS1", "HISTFILE", "TZ"};
    const std::vector<std::string> verbs = {"export ", "echo $", "unset ", "ls ", "cat /etc/"};
    for (int trial = 0; trial < 100; ++trial) {
      CollectedOutput cmds{"cmds", {}}, vars{"vars", {}};
      const auto nc = rng() % 12, nv = rng() % 4;
      for (std::size_t i = 0; i < nc; ++i) {
        auto text = verbs[rng() % verbs.size()] + (rng() % 2 ? names[rng() % names.size()] : std::string("foo"));
        cmds.records.push_back(cmd(static_cast<std::int64_t>(i), text));
      }
      for (std::size_t i = 0; i < nv; ++i) vars.records.push_back(var(names[rng() % names.size()]));

      std::vector<Record> expected;
      for (const auto& c : cmds.records) {
        bool hit = false;
        for (const auto& v : vars.records)
          if (std::get<std::string>(c.at("cmd_str")).find(std::get<std::string>(v.at("var_name"))) !=
              std::string::npos)
            hit = true;
        if (hit) expected.push_back(c);
      }
      CHECK(lambda_name(cmds, vars).records == expected);
      const auto via_expr = eval_integration(E::apply(Op::NameJoin, {E::leaf("cmds"), E::leaf("vars")}),
                                             std::map<std::string, CollectedOutput>{{"cmds", cmds}, {"vars", vars}});
      CHECK(via_expr.records == expected);
    }
  }

  TEST_CASE("name join reports missing fields") {
    const auto c = stream("c", {Record{{"text", Value{std::string("x")}}}});
    const auto v = stream("v", {var("x")});
    CHECK_THROWS_AS(lambda_name(c, v), TypeError);
    CHECK(lambda_name(c, v, "text").records.size() == 1);
  }

  TEST_CASE("unresolved references") {
    const auto e = E::apply(Op::Union, {E::leaf("a"), E::leaf("missing")});
    std::map<std::string, CollectedOutput> outs = {{"a", stream("a", {})}};
    CHECK_THROWS_AS(eval_integration(e, outs), ReferenceError);
    CHECK(e.refs() == std::vector<std::string>{"a", "missing"});
  }

  TEST_CASE("expression json round trip") {
    auto e = E::apply(Op::NameJoin,
                      {E::leaf("cmds"), E::apply(Op::Eq, {E::leaf("vars"), E::constant(Value{std::string("PATH")})},
                                                 {{"field", "var_name"}})},
                      {{"text_field", "cmd_str"}});
    e.children[0].binding = "command_history";
    const auto j = expr_to_json(e);
    CHECK(expr_from_json(nlohmann::json::parse(j.dump())) == e);
  }
}
