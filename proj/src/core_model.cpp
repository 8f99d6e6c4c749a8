#include "emergent/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "emergent/errors.hpp"

namespace emergent {

InfeasibleError::InfeasibleError(std::vector<std::string> roles)
    : Error([&] {
        std::string w = "infeasible compulsory roles:";
        for (const auto& r : roles) w += " " + r;
        return w;
      }()),
      roles_(std::move(roles)) {}

InvalidRoleError::InvalidRoleError(const std::string& role, std::vector<std::string> codes)
    : Error([&] {
        std::string w = "invalid role '" + role + "':";
        for (const auto& c : codes) w += " " + c;
        return w;
      }()),
      codes_(std::move(codes)) {}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : Error("parse error at " + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

ValidationError::ValidationError(std::vector<std::string> problems)
    : Error([&] {
        std::string w = "scenario validation failed";
        for (const auto& p : problems) w += "\n  " + p;
        return w;
      }()),
      problems_(std::move(problems)) {}

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string Thing::user() const {
  if (auto it = attributes.find("user"); it != attributes.end()) {
    if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  }
  return id.value;
}

std::optional<AttributeValue> Thing::attribute(const std::string& key) const {
  if (key == "platform") return AttributeValue{platform};
  if (auto it = attributes.find(key); it != attributes.end()) return it->second;
  return std::nullopt;
}

bool operator==(const Thing& a, const Thing& b) {
  return a.id == b.id && a.capabilities == b.capabilities && a.location == b.location &&
         a.platform == b.platform && a.protocols == b.protocols && a.attributes == b.attributes;
}

bool Condition::matches(ConditionKind k, const std::string& tag) const {
  return k == kind && (payload_pattern == kWildcard || payload_pattern == tag);
}

namespace {

std::set<ServiceTypeId> collect(const std::vector<ServiceSpec>& services, auto pred) {
  std::set<ServiceTypeId> out;
  for (const auto& s : services) {
    if (pred(s)) out.insert(s.type_id);
  }
  return out;
}

}  // namespace

std::set<ServiceTypeId> Role::provided() const {
  return collect(services, [](const ServiceSpec& s) { return s.direction == Direction::Provided; });
}
std::set<ServiceTypeId> Role::expected() const {
  return collect(services, [](const ServiceSpec& s) { return s.direction == Direction::Expected; });
}
std::set<ServiceTypeId> Role::mandatory() const {
  return collect(services, [](const ServiceSpec& s) { return s.necessity == Necessity::Mandatory; });
}
std::set<ServiceTypeId> Role::optional() const {
  return collect(services, [](const ServiceSpec& s) { return s.necessity == Necessity::Optional; });
}

std::size_t Role::instance_limit(std::size_t thing_count) const {
  // A thing never holds two instances of the same role.
  if (max_instances) return std::min(*max_instances, thing_count);
  return compulsory ? std::min<std::size_t>(1, thing_count) : thing_count;
}

bool Role::remote_capable() const {
  return std::any_of(services.begin(), services.end(),
                     [](const ServiceSpec& s) { return !s.proximity_required; });
}

std::optional<ServiceTypeId> Role::invoke(ConditionKind kind, const std::string& tag) const {
  // Literal matches take precedence over the wildcard.
  for (const auto& [cond, service] : invocation_table) {
    if (cond.kind == kind && cond.payload_pattern == tag) return service;
  }
  for (const auto& [cond, service] : invocation_table) {
    if (cond.matches(kind, tag)) return service;
  }
  return std::nullopt;
}

bool ValidationReport::has(const std::string& code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_role(const Role& role) {
  ValidationReport report;
  auto add = [&](std::string code, std::string detail) {
    report.violations.push_back({std::move(code), std::move(detail)});
  };

  if (role.name.empty()) add("empty-name", "role name is empty");
  if (role.max_instances && *role.max_instances == 0) add("zero-max-instances", role.name);

  std::set<std::pair<ServiceTypeId, Direction>> seen;
  for (const auto& s : role.services) {
    if (s.type_id.empty()) add("empty-service-id", role.name);
    if (!seen.insert({s.type_id, s.direction}).second) {
      add("duplicate-service", s.type_id + " (" + to_string(s.direction) + ")");
    }
  }

  std::set<Condition> chi;
  for (const auto& c : role.conditions) {
    const auto& p = c.payload_pattern;
    if (p.empty() || (p.find('*') != std::string::npos && p != kWildcard)) {
      add("bad-pattern", "'" + p + "'");
    }
    if (!chi.insert(c).second) add("duplicate-condition", to_string(c.kind) + ":" + p);
  }

  std::set<ServiceTypeId> all_services;
  for (const auto& s : role.services) all_services.insert(s.type_id);
  for (const auto& [cond, service] : role.invocation_table) {
    if (!chi.contains(cond)) {
      add("phi-domain-outside-chi", to_string(cond.kind) + ":" + cond.payload_pattern);
    }
    if (!all_services.contains(service)) add("phi-image-outside-S", service);
  }
  for (const auto& c : chi) {
    if (!role.invocation_table.contains(c)) {
      add("phi-not-total", to_string(c.kind) + ":" + c.payload_pattern);
    }
  }
  return report;
}

Constraint Constraint::of(Predicate p) {
  const bool physical =
      std::holds_alternative<WithinRadius>(p) || std::holds_alternative<HasAttribute>(p);
  return Constraint{physical ? ConstraintKind::Physical : ConstraintKind::Virtual, std::move(p)};
}

bool Constraint::satisfied_by(const Thing& thing) const {
  struct Visitor {
    const Thing& t;
    bool operator()(const WithinRadius& c) const { return distance(t.location, c.center) <= c.radius; }
    bool operator()(const HasAttribute& c) const {
      auto v = t.attribute(c.key);
      return v && *v == c.value;
    }
    bool operator()(const SupportsProtocol& c) const { return t.protocols.contains(c.name); }
    bool operator()(const MaxLatency& c) const {
      auto v = t.attribute("latency_ms");
      if (!v) return false;
      const auto* ms = std::get_if<double>(&*v);
      return ms != nullptr && *ms <= c.ms;
    }
    bool operator()(const RequiresCapability& c) const { return t.capabilities.contains(c.service); }
  };
  return std::visit(Visitor{thing}, predicate);
}

bool Environment::satisfied_by(const Thing& thing) const {
  return std::all_of(constraints.begin(), constraints.end(),
                     [&](const Constraint& c) { return c.satisfied_by(thing); });
}

bool Environment::satisfied_remotely_by(const Thing& thing) const {
  return std::all_of(constraints.begin(), constraints.end(), [&](const Constraint& c) {
    return c.is_proximity() || c.satisfied_by(thing);
  });
}

std::set<ThingId> induce_things(const Environment& env, std::span<const Thing> candidates) {
  std::set<ThingId> out;
  for (const auto& t : candidates) {
    if (env.satisfied_by(t)) out.insert(t.id);
  }
  return out;
}

bool eligible(const Environment& env, const Role& role, const Thing& thing) {
  return role.remote_capable() ? env.satisfied_remotely_by(thing) : env.satisfied_by(thing);
}

std::string RoleInstanceId::str() const { return role + "#" + std::to_string(index); }

const Role* Configuration::role(const std::string& name) const {
  auto it = std::find_if(roles.begin(), roles.end(), [&](const Role& r) { return r.name == name; });
  return it == roles.end() ? nullptr : &*it;
}

Role* Configuration::role(const std::string& name) {
  auto it = std::find_if(roles.begin(), roles.end(), [&](const Role& r) { return r.name == name; });
  return it == roles.end() ? nullptr : &*it;
}

std::vector<RoleInstanceId> Configuration::instances_of(const std::string& name) const {
  std::vector<RoleInstanceId> out;
  for (const auto& [inst, _] : delta) {
    if (inst.role == name) out.push_back(inst);
  }
  return out;
}

std::vector<RoleInstanceId> Configuration::instances_held_by(const ThingId& thing) const {
  std::vector<RoleInstanceId> out;
  for (const auto& [inst, t] : delta) {
    if (t == thing) out.push_back(inst);
  }
  return out;
}

std::optional<RoleInstanceId> Configuration::free_instance(const std::string& name,
                                                           std::size_t thing_count) const {
  const Role* r = role(name);
  if (r == nullptr) return std::nullopt;
  const auto used = instances_of(name);
  if (used.size() >= r->instance_limit(thing_count)) return std::nullopt;
  std::uint32_t idx = 0;
  for (const auto& inst : used) {
    if (inst.index != idx) break;
    ++idx;
  }
  return RoleInstanceId{name, idx};
}

std::vector<std::string> Configuration::unmapped_compulsory() const {
  std::vector<std::string> out;
  for (const auto& r : roles) {
    if (r.compulsory && instances_of(r.name).empty()) out.push_back(r.name);
  }
  return out;
}

std::vector<const Role*> compulsory_roles(std::span<const Role> roles) {
  std::vector<const Role*> out;
  for (const auto& r : roles) {
    if (r.compulsory) out.push_back(&r);
  }
  return out;
}

std::vector<const Role*> optional_roles(std::span<const Role> roles) {
  std::vector<const Role*> out;
  for (const auto& r : roles) {
    if (!r.compulsory) out.push_back(&r);
  }
  return out;
}

Classification classify(std::span<const Role> roles) {
  if (roles.empty()) return Classification::Degenerate;
  const auto gamma_upper = compulsory_roles(roles).size();
  const auto gamma_lower = roles.size() - gamma_upper;
  if (gamma_lower == 0) return Classification::Centralized;
  if (gamma_upper == 0) return Classification::Decentralized;
  return Classification::Hybrid;
}

Classification classify(const Configuration& config) { return classify(config.roles); }

CompatibilityReport check_compatibility(const Role& provider, const Role& consumer) {
  CompatibilityReport report;
  const auto offered = provider.provided();
  for (const auto& s : consumer.expected()) {
    const bool ok = offered.contains(s);
    report.entries.push_back({s, ok});
    if (!ok) report.missing.insert(s);
  }
  report.fully_served = report.missing.empty();
  return report;
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::Centralized: return "Centralized";
    case Classification::Decentralized: return "Decentralized";
    case Classification::Hybrid: return "Hybrid";
    case Classification::Degenerate: return "Degenerate";
  }
  return "?";
}

std::string to_string(ConfigState s) {
  switch (s) {
    case ConfigState::Forming: return "Forming";
    case ConfigState::Operational: return "Operational";
    case ConfigState::Dissolved: return "Dissolved";
  }
  return "?";
}

std::string to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::MessageReceived: return "MessageReceived";
    case ConditionKind::EventObserved: return "EventObserved";
    case ConditionKind::ActivityRecognized: return "ActivityRecognized";
    case ConditionKind::UserCommand: return "UserCommand";
  }
  return "?";
}

std::string to_string(Direction d) { return d == Direction::Provided ? "provided" : "expected"; }
std::string to_string(Necessity n) { return n == Necessity::Mandatory ? "mandatory" : "optional"; }

std::optional<Classification> classification_from_string(const std::string& s) {
  for (auto c : {Classification::Centralized, Classification::Decentralized, Classification::Hybrid,
                 Classification::Degenerate}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<ConfigState> config_state_from_string(const std::string& s) {
  for (auto c : {ConfigState::Forming, ConfigState::Operational, ConfigState::Dissolved}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<ConditionKind> condition_kind_from_string(const std::string& s) {
  for (auto k : {ConditionKind::MessageReceived, ConditionKind::EventObserved,
                 ConditionKind::ActivityRecognized, ConditionKind::UserCommand}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

}  // namespace emergent
