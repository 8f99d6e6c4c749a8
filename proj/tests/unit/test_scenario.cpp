#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "emergent/errors.hpp"
#include "emergent/orchestrator.hpp"
#include "emergent/scenario.hpp"
#include "emergent/trace.hpp"

using namespace emergent;

namespace {

std::string scenario_path(const std::string& name) { return std::string(EMERGENT_SCENARIO_DIR) + "/" + name + ".json"; }

const std::vector<std::string> kShipped = {"mesh_presenter", "qos_auction", "remote_reviewer", "jogging_in_park"};

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> problems_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ValidationError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

const char* kMinimal = R"({
  "schema_version": 1,
  "name": "mini",
  "services": ["x"],
  "things": [{"id": "a", "capabilities": ["x"], "location": [0, 0], "platform": "p", "protocols": ["mesh"]}],
  "roles": [{"name": "lead", "compulsory": true, "services": [{"type": "x", "direction": "provided"}]}],
  "templates": [{"name": "t", "purpose": {"tag": "go", "required_capabilities": ["x"]}, "roles": ["lead"]}],
  "goals": [{"at_ms": 0, "user": "u", "tag": "go", "required_capabilities": ["x"]}]
})";

}  // namespace

TEST(LoadScenario, MeshPresenterHasOneCompulsoryAndOneOptionalRole) {
  const auto doc = load_scenario(scenario_path("mesh_presenter"));
  ASSERT_EQ(doc.templates.size(), 1u);
  const auto& roles = doc.templates[0].roles;
  EXPECT_EQ(compulsory_roles(roles).size(), 1u);
  EXPECT_EQ(optional_roles(roles).size(), 1u);
  EXPECT_EQ(compulsory_roles(roles)[0]->name, "presenter");
  EXPECT_EQ(optional_roles(roles)[0]->name, "reviewer");
  for (const auto& r : doc.roles) EXPECT_TRUE(validate_role(r).ok()) << r.name;
}

TEST(LoadScenario, AllShippedScenariosValidate) {
  for (const auto& name : kShipped) {
    const auto doc = load_scenario(scenario_path(name));
    EXPECT_TRUE(validate_scenario(doc).empty()) << name;
    EXPECT_EQ(doc.name, name);
  }
}

TEST(LoadScenario, UndeclaredServiceIsNamed) {
  std::string text = kMinimal;
  text.replace(text.find(R"("capabilities": ["x"])"), 21, R"("capabilities": ["x", "teleport"])");
  const auto problems = problems_of(text);
  ASSERT_FALSE(problems.empty());
  EXPECT_TRUE(mentions(problems, "undeclared service teleport"));
}

TEST(LoadScenario, EmptyDocumentHasNoThings) {
  EXPECT_TRUE(mentions(problems_of("{}"), "no things"));
  EXPECT_TRUE(mentions(problems_of(""), "no things"));
}

TEST(LoadScenario, MalformedJsonReportsPosition) {
  try {
    parse_scenario("{\n  \"name\": \"x\",\n  oops\n}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_GE(e.column(), 1u);
  }
}

TEST(LoadScenario, UnknownFieldAndReferencesAreCollected) {
  std::string text = kMinimal;
  text.replace(text.find(R"("roles": ["lead"])"), 17, R"("roles": ["lead", "ghost"], "colour": "red")");
  const auto problems = problems_of(text);
  EXPECT_TRUE(mentions(problems, "unknown role ghost"));
  EXPECT_TRUE(mentions(problems, "colour: unknown field"));
}

TEST(LoadScenario, UnknownConfigurationAndThingInWorldEvents) {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), R"(, "world_events": [{"at_ms": 5, "type": "leave", "thing": "zz", "config": "C2"}])");
  const auto problems = problems_of(text);
  EXPECT_TRUE(mentions(problems, "unknown thing zz"));
  EXPECT_TRUE(mentions(problems, "unknown configuration C2"));
}

TEST(LoadScenario, DefaultsAreFilled) {
  const auto doc = parse_scenario(kMinimal);
  EXPECT_EQ(doc.sim.seed, 0u);
  EXPECT_EQ(doc.sim.default_latency_ms, 10);
  EXPECT_EQ(doc.sim.drop_probability, 0.0);
  EXPECT_EQ(doc.sim.handshake_timeout_ms, 2000);
  EXPECT_EQ(doc.templates[0].bid_window_ms, 500);
  EXPECT_FALSE(doc.templates[0].roles[0].services[0].necessity == Necessity::Optional);
}

TEST(LoadScenario, MissingFileIsAnError) {
  EXPECT_THROW(load_scenario("/nonexistent/p.json"), Error);
}

TEST(RoundTrip, LoadSerializeLoadIsEqual) {
  for (const auto& name : kShipped) {
    const auto doc = load_scenario(scenario_path(name));
    const auto again = parse_scenario(serialize_scenario(doc));
    EXPECT_EQ(doc, again) << name;
    EXPECT_EQ(serialize_scenario(doc), serialize_scenario(again)) << name;
  }
}

TEST(RoundTrip, SignalBlocksExpandToIndividualSignals) {
  const auto doc = load_scenario(scenario_path("mesh_presenter"));
  std::size_t gps = 0;
  for (const auto& ev : doc.world_events) {
    if (const auto* s = std::get_if<SignalAction>(&ev.action); s && s->signal.sensor == "gps") ++gps;
  }
  EXPECT_EQ(gps, 6u);
}

TEST(TraceFormat, EveryShippedRecordMatchesSchema) {
  for (const auto& name : kShipped) {
    const auto doc = load_scenario(scenario_path(name));
    for (const auto& rec : run_scenario(doc, 1, 600000)) {
      EXPECT_TRUE(check_record_schema(rec).empty()) << name << " " << to_json_line(rec);
    }
  }
}

TEST(TraceFormat, LinesRoundTripThroughParser) {
  const auto doc = load_scenario(scenario_path("qos_auction"));
  const Trace t = run_scenario(doc, 3, 600000);
  std::stringstream ss(serialize_trace(t));
  EXPECT_EQ(read_trace(ss), t);
}

TEST(TraceFormat, LineShape) {
  const TraceRecord r{42, TraceKind::ThingJoined, {{"config", "C1"}, {"thing", "t"}}};
  EXPECT_EQ(to_json_line(r), R"({"at_ms":42,"kind":"ThingJoined","config":"C1","thing":"t"})");
}

TEST(TraceFormat, UnknownKindAndMissingFieldRejected) {
  EXPECT_THROW(parse_trace_line(R"({"at_ms":1,"kind":"Teleported"})"), ValidationError);
  EXPECT_THROW(parse_trace_line(R"({"at_ms":1,"kind":"ThingJoined","config":"C1"})"), ValidationError);
  EXPECT_THROW(parse_trace_line(R"({"at_ms":1,)"), ParseError);
}

TEST(Summary, FoldOverMeshPresenter) {
  const auto doc = load_scenario(scenario_path("mesh_presenter"));
  const Trace t = run_scenario(doc, 0, 600000);
  // Independent fold over the raw records.
  std::size_t granted = 0, denied = 0, invoked = 0;
  std::string last_state;
  for (const auto& r : t) {
    if (r.str("config") != "C1") continue;
    granted += r.kind == TraceKind::RoleGranted ? 1 : 0;
    denied += r.kind == TraceKind::RoleDenied ? 1 : 0;
    invoked += r.kind == TraceKind::ServiceInvoked ? 1 : 0;
    if (r.kind == TraceKind::ConfigFormed) last_state = "Operational";
    if (r.kind == TraceKind::ConfigStateChanged) last_state = r.str("to");
  }
  const auto s = summarize(t);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].config, "C1");
  EXPECT_EQ(s[0].classification, "Hybrid");
  EXPECT_EQ(s[0].formed_at_ms, 0);
  EXPECT_EQ(s[0].roles_granted, granted);
  EXPECT_EQ(s[0].roles_denied, denied);
  EXPECT_EQ(s[0].service_invocations, invoked);
  EXPECT_EQ(s[0].final_state, last_state);
  EXPECT_EQ(s[0].final_state, "Dissolved");
}

TEST(Summary, PureFunctionOfTraceFile) {
  const auto doc = load_scenario(scenario_path("remote_reviewer"));
  const Trace t = run_scenario(doc, 0, 600000);
  std::stringstream ss(serialize_trace(t));
  EXPECT_EQ(summarize(read_trace(ss)), summarize(t));
}

TEST(Validate, BrokenFixtureCollectsEveryProblem) {
  const auto problems = problems_of(read_file(std::string(EMERGENT_TEST_DATA_DIR) + "/broken.json"));
  EXPECT_GE(problems.size(), 2u);
}
