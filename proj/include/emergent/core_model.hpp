#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emergent/message.hpp"

namespace emergent {

using ServiceTypeId = std::string;

// 2-D position in meters.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double distance(const Point& a, const Point& b);

using AttributeValue = std::variant<std::string, double>;

// A uniquely identifiable device able to exchange data.
struct Thing {
  ThingId id;
  std::set<ServiceTypeId> capabilities;
  Point location;
  std::string platform;
  std::set<std::string> protocols;
  // Extra attributes (`user`, `latency_ms`, `port`, ...).
  std::map<std::string, AttributeValue> attributes;
  std::deque<Message> mailbox;

  // Owning user: the `user` attribute when present, else the thing id.
  std::string user() const;
  std::optional<AttributeValue> attribute(const std::string& key) const;

  // Mailbox contents are runtime state and do not participate.
  friend bool operator==(const Thing& a, const Thing& b);
};

enum class Direction { Provided, Expected };
enum class Necessity { Mandatory, Optional };

struct ServiceSpec {
  ServiceTypeId type_id;
  Direction direction = Direction::Provided;
  Necessity necessity = Necessity::Mandatory;
  // When false, instances of a role holding this service may live outside
  // proximity (WithinRadius) constraints.
  bool proximity_required = true;

  friend bool operator==(const ServiceSpec&, const ServiceSpec&) = default;
};

enum class ConditionKind { MessageReceived, EventObserved, ActivityRecognized, UserCommand };

// A trigger pattern: a literal tag or the wildcard "*".
struct Condition {
  ConditionKind kind = ConditionKind::UserCommand;
  std::string payload_pattern;

  bool matches(ConditionKind k, const std::string& tag) const;
  friend auto operator<=>(const Condition&, const Condition&) = default;
};

inline constexpr std::string_view kWildcard = "*";

struct Role {
  std::string name;
  bool compulsory = false;
  std::vector<Condition> conditions;
  std::vector<ServiceSpec> services;
  std::map<Condition, ServiceTypeId> invocation_table;
  // nullopt: 1 for compulsory roles, unbounded for optional ones.
  std::optional<std::size_t> max_instances;

  std::set<ServiceTypeId> provided() const;
  std::set<ServiceTypeId> expected() const;
  std::set<ServiceTypeId> mandatory() const;
  std::set<ServiceTypeId> optional() const;
  std::size_t instance_limit(std::size_t thing_count) const;
  bool remote_capable() const;
  // Service that φ activates for this trigger, if any condition matches.
  std::optional<ServiceTypeId> invoke(ConditionKind kind, const std::string& tag) const;

  friend bool operator==(const Role&, const Role&) = default;
};

struct Violation {
  std::string code;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& code) const;
};

ValidationReport validate_role(const Role& role);

enum class ConstraintKind { Physical, Virtual };

struct WithinRadius {
  Point center;
  double radius = 0.0;
  friend bool operator==(const WithinRadius&, const WithinRadius&) = default;
};
struct HasAttribute {
  std::string key;
  AttributeValue value;
  friend bool operator==(const HasAttribute&, const HasAttribute&) = default;
};
struct SupportsProtocol {
  std::string name;
  friend bool operator==(const SupportsProtocol&, const SupportsProtocol&) = default;
};
struct MaxLatency {
  double ms = 0.0;
  friend bool operator==(const MaxLatency&, const MaxLatency&) = default;
};
struct RequiresCapability {
  ServiceTypeId service;
  friend bool operator==(const RequiresCapability&, const RequiresCapability&) = default;
};

using Predicate = std::variant<WithinRadius, HasAttribute, SupportsProtocol, MaxLatency, RequiresCapability>;

struct Constraint {
  ConstraintKind kind = ConstraintKind::Virtual;
  Predicate predicate;

  // Builds a constraint with the kind its predicate implies.
  static Constraint of(Predicate p);
  bool satisfied_by(const Thing& thing) const;
  bool is_proximity() const { return std::holds_alternative<WithinRadius>(predicate); }

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

struct Environment {
  std::vector<Constraint> constraints;

  bool satisfied_by(const Thing& thing) const;
  // Same conjunction with WithinRadius constraints skipped.
  bool satisfied_remotely_by(const Thing& thing) const;

  friend bool operator==(const Environment&, const Environment&) = default;
};

std::set<ThingId> induce_things(const Environment& env, std::span<const Thing> candidates);

// Whether `thing` may hold an instance of `role` under `env`.
bool eligible(const Environment& env, const Role& role, const Thing& thing);

struct PurposeTag {
  std::string tag;
  std::set<ServiceTypeId> required_capabilities;
  friend bool operator==(const PurposeTag&, const PurposeTag&) = default;
};

struct RoleInstanceId {
  std::string role;
  std::uint32_t index = 0;

  std::string str() const;
  friend auto operator<=>(const RoleInstanceId&, const RoleInstanceId&) = default;
};

enum class ConfigState { Forming, Operational, Dissolved };

struct MatchPolicy {
  bool allow_multi_role = false;
  friend bool operator==(const MatchPolicy&, const MatchPolicy&) = default;
};

struct Configuration {
  std::vector<Role> roles;
  std::set<ThingId> things;
  std::map<RoleInstanceId, ThingId> delta;
  PurposeTag purpose;
  Environment environment;
  ConfigState state = ConfigState::Forming;
  MatchPolicy policy;

  const Role* role(const std::string& name) const;
  Role* role(const std::string& name);
  std::vector<RoleInstanceId> instances_of(const std::string& role) const;
  std::vector<RoleInstanceId> instances_held_by(const ThingId& thing) const;
  std::optional<RoleInstanceId> free_instance(const std::string& role, std::size_t thing_count) const;
  // Compulsory roles with no mapped instance.
  std::vector<std::string> unmapped_compulsory() const;

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

// Γ_C(R) and γ_C(R).
std::vector<const Role*> compulsory_roles(std::span<const Role> roles);
std::vector<const Role*> optional_roles(std::span<const Role> roles);

enum class Classification { Centralized, Decentralized, Hybrid, Degenerate };

Classification classify(std::span<const Role> roles);
Classification classify(const Configuration& config);

struct CompatibilityEntry {
  ServiceTypeId service;
  bool provided = false;
};

struct CompatibilityReport {
  std::vector<CompatibilityEntry> entries;
  std::set<ServiceTypeId> missing;
  bool fully_served = false;
};

// How well `provider`'s P set serves `consumer`'s E set.
CompatibilityReport check_compatibility(const Role& provider, const Role& consumer);

std::string to_string(Classification c);
std::string to_string(ConfigState s);
std::string to_string(ConditionKind k);
std::string to_string(Direction d);
std::string to_string(Necessity n);
std::optional<Classification> classification_from_string(const std::string& s);
std::optional<ConfigState> config_state_from_string(const std::string& s);
std::optional<ConditionKind> condition_kind_from_string(const std::string& s);

}  // namespace emergent
