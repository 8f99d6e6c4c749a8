#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "emergent/context.hpp"
#include "emergent/core_model.hpp"
#include "emergent/matcher.hpp"
#include "emergent/protocol.hpp"

namespace emergent {

struct Goal {
  std::string user;
  std::string tag;
  std::set<ServiceTypeId> required_capabilities;

  friend bool operator==(const Goal&, const Goal&) = default;
};

std::vector<std::string> validate_goal(const Goal& goal);

struct ConfigurationTemplate {
  std::string name;
  PurposeTag purpose;
  std::vector<Role> roles;
  Environment environment;
  // Required for templates without compulsory roles.
  bool all_optional = false;
  // Compulsory roles assigned by Contract Net auctions instead of the matcher.
  bool auction_assignment = false;
  SimTime bid_window_ms = 500;
  MatchPolicy policy;
  // Role the coordinator offers to things that enter the environment.
  std::optional<std::string> offer_on_enter;

  friend bool operator==(const ConfigurationTemplate&, const ConfigurationTemplate&) = default;
};

std::vector<std::string> validate_template(const ConfigurationTemplate& tpl);

// goal.tag == purpose.tag, or the goal's capabilities ⊆ ∪ P(r).
bool accommodates(const PurposeTag& purpose, std::span<const Role> roles, const Goal& goal);
bool accommodates(const ConfigurationTemplate& tpl, const Goal& goal);

struct FormationPlan {
  std::size_t template_index = 0;
  std::set<ThingId> things;
  std::vector<Thing> candidates;  // the induced things, id order
};

// First accommodating template in declaration order and its induced things.
// Throws NoTemplateError.
FormationPlan plan_formation(const Goal& goal, std::span<const ConfigurationTemplate> templates,
                             std::span<const Thing> world);

// Matcher problem restricted to the template's compulsory roles.
MatchProblem compulsory_problem(const ConfigurationTemplate& tpl, std::span<const Thing> candidates);

// Operational configuration over the given mapping.
Configuration assemble_configuration(const ConfigurationTemplate& tpl, std::set<ThingId> things,
                                     std::map<RoleInstanceId, ThingId> delta);

// plan_formation + compute_delta on the compulsory roles. Throws
// NoTemplateError or InfeasibleError.
Configuration form_configuration(const Goal& goal, std::span<const ConfigurationTemplate> templates,
                                 std::span<const Thing> world);

struct LifecycleResult {
  Configuration config;
  // States entered, in order (empty when the state did not change).
  std::vector<ConfigState> transitions;
  std::vector<std::pair<RoleInstanceId, ThingId>> removed;
  std::vector<std::pair<RoleInstanceId, ThingId>> added;
};

// Handshake grant path. Throws NotInEnvironmentError when the thing is not
// eligible for the role.
RoleRequestOutcome join(const Configuration& config, const Thing& thing, const std::string& role,
                        std::size_t world_size, const ContextState* ctx);

// Drops every instance the thing holds and removes it from T. Loss of a
// compulsory role triggers one re-match (Forming); failure dissolves.
LifecycleResult leave(const Configuration& config, const ThingId& thing, std::span<const Thing> world);

// Additive role mutation; unmaps holders that no longer qualify and
// re-matches their instances. Throws InvalidRoleError, PreconditionError.
LifecycleResult mutate_role(const Configuration& config, const std::string& role,
                            const std::vector<ServiceSpec>& added, std::span<const Thing> world);

struct MembershipChange {
  LifecycleResult result;
  bool entered = false;  // the thing newly satisfies the environment
  bool left = false;     // the thing lost its roles by moving out
};

// Re-evaluates one (moved) thing against the environment.
MembershipChange refresh_membership(const Configuration& config, const ThingId& thing,
                                    std::span<const Thing> world);

// Safety invariant: Operational ⇒ every compulsory role is mapped and every
// mapped thing is feasible and eligible. Returns the violations found.
std::vector<std::string> check_operational_invariant(const Configuration& config, std::span<const Thing> world);

}  // namespace emergent
