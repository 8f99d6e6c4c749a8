#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "emergent/context.hpp"
#include "emergent/core_model.hpp"
#include "emergent/lifecycle.hpp"
#include "emergent/protocol.hpp"

namespace emergent {

inline constexpr int kScenarioSchemaVersion = 1;

struct LinkSpec {
  ThingId from;
  ThingId to;
  SimTime latency_ms = 0;

  friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct SimSettings {
  std::uint64_t seed = 0;
  SimTime default_latency_ms = 10;
  double drop_probability = 0.0;
  SimTime handshake_timeout_ms = 2000;
  std::vector<LinkSpec> links;

  friend bool operator==(const SimSettings&, const SimSettings&) = default;
};

struct ScenarioThing {
  Thing thing;
  ThingScript script;

  friend bool operator==(const ScenarioThing&, const ScenarioThing&) = default;
};

struct TimedGoal {
  SimTime at_ms = 0;
  Goal goal;
  // Thing that raised the goal; coordinator when no compulsory holder exists.
  std::optional<ThingId> host;

  friend bool operator==(const TimedGoal&, const TimedGoal&) = default;
};

// Configuration ids are "C1", "C2", ... in formation order.
struct RequestRoleAction {
  ThingId thing;
  std::string config;
  std::string role;
  friend bool operator==(const RequestRoleAction&, const RequestRoleAction&) = default;
};
struct LeaveAction {
  ThingId thing;
  std::string config;
  friend bool operator==(const LeaveAction&, const LeaveAction&) = default;
};
struct InvokeAction {
  ThingId caller;
  std::string config;
  ServiceTypeId service;
  std::string args;
  friend bool operator==(const InvokeAction&, const InvokeAction&) = default;
};
struct StatementAction {
  std::string user;
  std::string key;
  std::string value;
  friend bool operator==(const StatementAction&, const StatementAction&) = default;
};
struct MutateRoleAction {
  std::string config;
  std::string role;
  std::vector<ServiceSpec> services;
  friend bool operator==(const MutateRoleAction&, const MutateRoleAction&) = default;
};
struct MoveAction {
  ThingId thing;
  Point to;
  friend bool operator==(const MoveAction&, const MoveAction&) = default;
};
struct SignalAction {
  Signal signal;
  friend bool operator==(const SignalAction&, const SignalAction&) = default;
};

using WorldAction =
    std::variant<RequestRoleAction, LeaveAction, InvokeAction, StatementAction, MutateRoleAction, MoveAction, SignalAction>;

struct WorldEvent {
  SimTime at_ms = 0;
  WorldAction action;

  friend bool operator==(const WorldEvent&, const WorldEvent&) = default;
};

struct ScenarioDoc {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  SimSettings sim;
  std::vector<ServiceTypeId> services;
  std::vector<ScenarioThing> things;
  std::vector<Role> roles;
  std::vector<ConfigurationTemplate> templates;
  std::vector<EventRule> event_rules;
  std::vector<ActivityRule> activity_rules;
  std::vector<TimedGoal> goals;
  std::vector<WorldEvent> world_events;

  std::vector<Thing> world() const;
  const ScenarioThing* find_thing(const ThingId& id) const;

  friend bool operator==(const ScenarioDoc&, const ScenarioDoc&) = default;
};

// Throws ParseError(line, col) on malformed JSON and ValidationError on
// schema violations or unresolved references.
ScenarioDoc parse_scenario(const std::string& text);
ScenarioDoc load_scenario(const std::filesystem::path& path);

// Cross-reference diagnostics; empty when the document is valid.
std::vector<std::string> validate_scenario(const ScenarioDoc& doc);

nlohmann::ordered_json scenario_to_json(const ScenarioDoc& doc);
std::string serialize_scenario(const ScenarioDoc& doc);

}  // namespace emergent
