#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "provmon/capmodel.hpp"
#include "provmon/error.hpp"

using namespace provmon;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kEntities = {"process", "file", "socket", "envvar"};
const std::vector<std::string> kEvents = {"read", "write", "exec", "connect", "snapshot"};
const std::vector<AttributeSpec> kAttrs = {
    {"pid", DType::Int}, {"pid", DType::Str}, {"path", DType::Str}, {"ts", DType::Int}, {"tags", DType::Set}};

// Bitmask triple: entities in bits 0-3, events 4-8, attributes 9-13.
std::uint32_t random_mask(std::mt19937_64& rng, bool nonempty_core) {
  for (;;) {
    std::uint32_t m = static_cast<std::uint32_t>(rng()) & ((1u << 14) - 1);
    if (!nonempty_core || ((m & 0xF) && (m & 0x1F0))) return m;
  }
}

template <class T>
std::set<T> pick(const std::vector<T>& pool, std::uint32_t bits) {
  std::set<T> s;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (bits & (1u << i)) s.insert(pool[i]);
  return s;
}

TaskSpec task_of(std::uint32_t m) {
  TaskSpec t;
  t.name = "t";
  t.entities = pick(kEntities, m & 0xF);
  t.events = pick(kEvents, (m >> 4) & 0x1F);
  t.attributes = pick(kAttrs, (m >> 9) & 0x1F);
  return t;
}

CapabilityTriple cap_of(std::uint32_t m) {
  CapabilityTriple c;
  c.name = "c" + std::to_string(m);
  c.entities = pick(kEntities, m & 0xF);
  c.events = pick(kEvents, (m >> 4) & 0x1F);
  c.attributes = pick(kAttrs, (m >> 9) & 0x1F);
  return c;
}

}  // namespace

TEST_SUITE("capmodel") {
  TEST_CASE("mu equals the bitmask subset oracle") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 500; ++trial) {
      const auto tm = random_mask(rng, true);
      const std::size_t n = rng() % 5;
      std::vector<CapabilityTriple> catalog;
      int expected = 0;
      for (std::size_t i = 0; i < n; ++i) {
        auto cm = random_mask(rng, true);
        if (rng() % 3 == 0) cm |= tm;  // bias towards hits
        catalog.push_back(cap_of(cm));
        if ((tm & cm) == tm) expected = 1;
      }
      CHECK(mu(task_of(tm), catalog) == expected);
    }
  }

  TEST_CASE("attribute match requires the same dtype") {
    TaskSpec t;
    t.entities = {"process"};
    t.events = {"exec"};
    t.attributes = {{"pid", DType::Int}};
    CapabilityTriple c;
    c.entities = {"process"};
    c.events = {"exec"};
    c.attributes = {{"pid", DType::Str}};
    CHECK_FALSE(matches(t, c));
    c.attributes.insert({"pid", DType::Int});
    CHECK(matches(t, c));
    CHECK(mu(t, std::span<const CapabilityTriple>{}) == 0);
  }

  TEST_CASE("validation rejects empty sets and bad overheads") {
    CapabilityTriple c;
    c.name = "c";
    c.entities = {"process"};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c.events = {"exec"};
    CHECK_NOTHROW(validate(c));
    c.overhead = 1.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
    TaskSpec t;
    t.events = {"exec"};
    CHECK_THROWS_AS(validate(t), ConfigError);
    t.entities = {"process"};
    t.impl_overhead[ImplClass::NewKernel] = -0.1;
    CHECK_THROWS_AS(validate(t), ConfigError);
  }

  TEST_CASE("catalog fixture parses") {
    const auto catalog = parse_catalog(slurp(std::string(PROVMON_DATA_DIR) + "/envvar_catalog.json"));
    REQUIRE(catalog.size() == 2);
    CHECK(catalog[0].name == "command_history");
    CHECK(catalog[0].attributes.count({"pid", DType::Int}) == 1);
    CHECK(catalog[1].impl_class == ImplClass::Existing);
    const auto task = parse_task(slurp(std::string(PROVMON_DATA_DIR) + "/envvar_task.json"));
    CHECK(task.entities == std::set<std::string>{"envvar", "process"});
    CHECK(mu(task, catalog) == 0);
  }

  TEST_CASE("catalog forms and round trip") {
    const std::string one = R"({"name":"a","entities":["process"],"events":["exec"]})";
    const std::string two = R"({"name":"b","entities":["file"],"events":["read"],"impl_class":"kernel","overhead":0.3})";
    CHECK(parse_catalog("[" + one + "," + two + "]").size() == 2);
    CHECK(parse_catalog(R"({"catalog":[)" + one + "]}").size() == 1);
    const auto lines = parse_catalog(one + "\n" + two + "\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1].impl_class == ImplClass::NewKernel);
    const auto back = capability_from_json(nlohmann::json::parse(capability_to_json(lines[1]).dump()));
    CHECK(back.name == "b");
    CHECK(back.overhead == 0.3);
    CHECK(back.events == lines[1].events);
  }

  TEST_CASE("malformed documents are config errors") {
    CHECK_THROWS_AS(parse_catalog(R"([{"name":"a","entities":["p","p"],"events":["e"]}])"), ConfigError);
    CHECK_THROWS_AS(parse_catalog(R"([{"name":"a","entities":["p"],"events":["e"],"impl_class":"magic"}])"),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_catalog(R"([{"name":"a","entities":["p"],"events":["e"],"attributes":[{"name":"x","dtype":"Float"}]}])"),
        ConfigError);
    CHECK_THROWS_AS(parse_task(R"({"name":"t","entities":["p"]})"), ConfigError);
  }

  TEST_CASE("typed values and output validation") {
    const std::set<AttributeSpec> schema = {{"pid", DType::Int}, {"cmd", DType::Str}};
    const auto out = output_from_json(
        nlohmann::json::parse(R"({"subtask":"s","records":[{"pid":3,"cmd":"ls"},{"pid":4,"cmd":"id"}]})"), schema);
    CHECK(out.records.size() == 2);
    CHECK(std::get<std::int64_t>(out.records[1].at("pid")) == 4);
    CHECK(output_to_json(out).dump() == R"({"subtask":"s","records":[{"cmd":"ls","pid":3},{"cmd":"id","pid":4}]})");
    CHECK_THROWS_AS(output_from_json(nlohmann::json::parse(R"({"records":[{"pid":"3","cmd":"ls"}]})"), schema),
                    TypeError);
    CHECK_THROWS_AS(output_from_json(nlohmann::json::parse(R"({"records":[{"pid":3}]})"), schema), TypeError);
    CHECK_THROWS_AS(output_from_json(nlohmann::json::parse(R"({"records":[{"pid":3,"cmd":"a","x":1}]})"), schema),
                    TypeError);
    const auto ts = value_from_json(nlohmann::json::parse("[[1,0.5],[2,1.5]]"), DType::TimeSeries);
    CHECK(std::get<TimeSeriesValue>(ts).size() == 2);
    CHECK(value_to_json(ts).dump() == "[[1,0.5],[2,1.5]]");
    CHECK(dtype_of(value_from_json(nlohmann::json(2), DType::Real)) == DType::Real);
  }
}
