#pragma once

#include <string>
#include <vector>

#include "emergent/core_model.hpp"
#include "emergent/lifecycle.hpp"

namespace fixtures {

using namespace emergent;

inline ServiceSpec provided(const std::string& id) { return {id, Direction::Provided, Necessity::Mandatory, true}; }
inline ServiceSpec expected(const std::string& id) { return {id, Direction::Expected, Necessity::Mandatory, true}; }

inline Role presenter_role() {
  Role r;
  r.name = "presenter";
  r.compulsory = true;
  r.services = {provided("share_presentation"), provided("add_remove_reviewer"),
                provided("enable_presenter_control"), expected("share_content")};
  const Condition pull{ConditionKind::UserCommand, "pull_content"};
  r.conditions = {pull};
  r.invocation_table[pull] = "share_content";
  return r;
}

inline Role reviewer_role() {
  Role r;
  r.name = "reviewer";
  r.compulsory = false;
  r.services = {provided("share_content"), expected("share_presentation"), expected("add_remove_reviewer"),
                expected("enable_presenter_control")};
  const Condition meeting{ConditionKind::ActivityRecognized, "in_meeting"};
  const Condition view{ConditionKind::UserCommand, "view"};
  r.conditions = {meeting, view};
  r.invocation_table[meeting] = "add_remove_reviewer";
  r.invocation_table[view] = "share_presentation";
  return r;
}

inline Environment room() {
  return Environment{{Constraint::of(WithinRadius{{0, 0}, 10.0}), Constraint::of(SupportsProtocol{"mesh"})}};
}

inline Thing thing(const std::string& id, std::set<ServiceTypeId> caps, Point at, const std::string& user = {}) {
  Thing t;
  t.id = id;
  t.capabilities = std::move(caps);
  t.location = at;
  t.platform = "android";
  t.protocols = {"mesh"};
  if (!user.empty()) t.attributes["user"] = user;
  return t;
}

inline Thing tablet_a() {
  return thing("tablet-A", {"share_presentation", "add_remove_reviewer", "enable_presenter_control"}, {0, 0}, "alice");
}
inline Thing phone_b() { return thing("phone-B", {"share_content"}, {3, 2}, "bob"); }
inline Thing phone_c() { return thing("phone-C", {"share_content"}, {-2, 4}, "carol"); }
inline Thing laptop_r() { return thing("laptop-R", {"share_content", "remote_connect"}, {500, 0}, "dave"); }

inline std::vector<Thing> mp_world() { return {tablet_a(), phone_b(), phone_c(), laptop_r()}; }

inline ConfigurationTemplate mp_template() {
  ConfigurationTemplate t;
  t.name = "mesh_presenter";
  t.purpose = PurposeTag{"collaborative_presentation", {"share_presentation"}};
  t.roles = {presenter_role(), reviewer_role()};
  t.environment = room();
  t.offer_on_enter = "reviewer";
  return t;
}

inline Goal mp_goal() { return Goal{"alice", "collaborative_presentation", {"share_presentation"}}; }

}  // namespace fixtures
