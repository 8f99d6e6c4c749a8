#include "emergent/lifecycle.hpp"

#include <algorithm>

#include "emergent/errors.hpp"

namespace emergent {

namespace {

const Thing* find_thing(std::span<const Thing> world, const ThingId& id) {
  for (const auto& t : world) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

// Candidate for re-matching: a member of T, or a remote thing the role's
// waiver admits.
bool may_hold(const Configuration& c, const Role& role, const Thing& t) {
  const bool member = c.things.contains(t.id);
  const bool remote = role.remote_capable() && c.environment.satisfied_remotely_by(t);
  if (!member && !remote) return false;
  return eligible(c.environment, role, t) && feasible(role, t);
}

void set_state(LifecycleResult& r, ConfigState s) {
  if (r.config.state == s) return;
  r.config.state = s;
  r.transitions.push_back(s);
}

void unmap(LifecycleResult& r, const RoleInstanceId& inst) {
  auto it = r.config.delta.find(inst);
  if (it == r.config.delta.end()) return;
  r.removed.emplace_back(inst, it->second);
  r.config.delta.erase(it);
}

void map_instance(LifecycleResult& r, const RoleInstanceId& inst, const ThingId& t) {
  r.config.delta[inst] = t;
  r.config.things.insert(t);
  r.added.emplace_back(inst, t);
}

void dissolve(LifecycleResult& r) {
  const auto delta = r.config.delta;
  for (const auto& [inst, _] : delta) unmap(r, inst);
  set_state(r, ConfigState::Dissolved);
}

// Solver input for the missing compulsory roles over the things that may
// hold at least one of them.
std::optional<MatchResult> solve_compulsory(const Configuration& c, const std::vector<std::string>& roles,
                                            std::span<const Thing> world, const std::set<ThingId>& blocked) {
  MatchProblem p;
  p.policy = c.policy;
  for (const auto& name : roles) {
    Role r = *c.role(name);
    r.max_instances = 1;
    p.roles.push_back(std::move(r));
  }
  for (const auto& t : world) {
    if (blocked.contains(t.id)) continue;
    const bool any = std::any_of(p.roles.begin(), p.roles.end(), [&](const Role& r) { return may_hold(c, r, t); });
    if (any) p.things.push_back(t);
  }
  MatchResult res;
  try {
    res = compute_delta(p);
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
  // The matcher only sees capabilities; per-role eligibility is checked here.
  for (const auto& [inst, tid] : res.delta) {
    const Thing* t = find_thing(world, tid);
    if (t == nullptr || !may_hold(c, *c.role(inst.role), *t)) return std::nullopt;
  }
  return res;
}

void apply_compulsory(LifecycleResult& r, const MatchResult& res) {
  for (const auto& [inst, tid] : res.delta) {
    if (!r.config.policy.allow_multi_role) {
      for (const auto& held : r.config.instances_held_by(tid)) unmap(r, held);
    }
    map_instance(r, RoleInstanceId{inst.role, 0}, tid);
  }
}

// One re-match after a compulsory role lost its holder: surviving compulsory
// holders stay pinned (optional holders may be promoted); when that fails,
// every compulsory role is solved afresh. Dissolves on failure.
void rematch(LifecycleResult& r, std::span<const Thing> world, const std::set<ThingId>& exclude) {
  const auto missing = r.config.unmapped_compulsory();
  if (missing.empty()) return;
  set_state(r, ConfigState::Forming);

  std::set<ThingId> pinned = exclude;
  if (!r.config.policy.allow_multi_role) {
    for (const auto& [inst, tid] : r.config.delta) {
      if (r.config.role(inst.role)->compulsory) pinned.insert(tid);
    }
  }
  if (auto res = solve_compulsory(r.config, missing, world, pinned)) {
    apply_compulsory(r, *res);
    set_state(r, ConfigState::Operational);
    return;
  }

  std::vector<std::string> all;
  for (const auto* role : compulsory_roles(r.config.roles)) all.push_back(role->name);
  if (auto res = solve_compulsory(r.config, all, world, exclude)) {
    for (const auto& name : all) {
      for (const auto& inst : r.config.instances_of(name)) unmap(r, inst);
    }
    apply_compulsory(r, *res);
    set_state(r, ConfigState::Operational);
    return;
  }
  dissolve(r);
}

}  // namespace

std::vector<std::string> validate_goal(const Goal& goal) {
  std::vector<std::string> out;
  if (goal.user.empty()) out.push_back("goal has no user");
  if (goal.tag.empty()) out.push_back("goal has no tag");
  if (goal.required_capabilities.empty()) out.push_back("goal has no required capabilities");
  return out;
}

std::vector<std::string> validate_template(const ConfigurationTemplate& tpl) {
  std::vector<std::string> out;
  if (tpl.name.empty()) out.push_back("template has no name");
  std::set<std::string> names;
  for (const auto& role : tpl.roles) {
    if (!names.insert(role.name).second) out.push_back("duplicate role " + role.name);
    for (const auto& v : validate_role(role).violations) out.push_back(role.name + ": " + v.code);
  }
  if (compulsory_roles(tpl.roles).empty() && !tpl.all_optional) {
    out.push_back("template " + tpl.name + " has no compulsory role and is not marked all_optional");
  }
  if (tpl.offer_on_enter && !names.contains(*tpl.offer_on_enter)) {
    out.push_back("offer_on_enter names unknown role " + *tpl.offer_on_enter);
  }
  if (tpl.bid_window_ms <= 0) out.push_back("bid window must be positive");
  return out;
}

bool accommodates(const PurposeTag& purpose, std::span<const Role> roles, const Goal& goal) {
  if (goal.tag == purpose.tag) return true;
  std::set<ServiceTypeId> provided;
  for (const auto& r : roles) {
    const auto p = r.provided();
    provided.insert(p.begin(), p.end());
  }
  return std::includes(provided.begin(), provided.end(), goal.required_capabilities.begin(),
                       goal.required_capabilities.end());
}

bool accommodates(const ConfigurationTemplate& tpl, const Goal& goal) {
  return accommodates(tpl.purpose, tpl.roles, goal);
}

FormationPlan plan_formation(const Goal& goal, std::span<const ConfigurationTemplate> templates,
                             std::span<const Thing> world) {
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (!accommodates(templates[i], goal)) continue;
    FormationPlan plan;
    plan.template_index = i;
    plan.things = induce_things(templates[i].environment, world);
    for (const auto& t : world) {
      if (plan.things.contains(t.id)) plan.candidates.push_back(t);
    }
    std::sort(plan.candidates.begin(), plan.candidates.end(), [](const Thing& a, const Thing& b) { return a.id < b.id; });
    return plan;
  }
  throw NoTemplateError("no template accommodates goal " + goal.tag);
}

MatchProblem compulsory_problem(const ConfigurationTemplate& tpl, std::span<const Thing> candidates) {
  MatchProblem p;
  p.policy = tpl.policy;
  for (const auto* r : compulsory_roles(tpl.roles)) p.roles.push_back(*r);
  p.things.assign(candidates.begin(), candidates.end());
  return p;
}

Configuration assemble_configuration(const ConfigurationTemplate& tpl, std::set<ThingId> things,
                                     std::map<RoleInstanceId, ThingId> delta) {
  Configuration c;
  c.roles = tpl.roles;
  c.things = std::move(things);
  c.delta = std::move(delta);
  c.purpose = tpl.purpose;
  c.environment = tpl.environment;
  c.policy = tpl.policy;
  c.state = ConfigState::Operational;
  return c;
}

Configuration form_configuration(const Goal& goal, std::span<const ConfigurationTemplate> templates,
                                 std::span<const Thing> world) {
  const auto plan = plan_formation(goal, templates, world);
  const auto& tpl = templates[plan.template_index];
  const auto res = compute_delta(compulsory_problem(tpl, plan.candidates));
  return assemble_configuration(tpl, plan.things, res.delta);
}

RoleRequestOutcome join(const Configuration& config, const Thing& thing, const std::string& role,
                        std::size_t world_size, const ContextState* ctx) {
  const Role* r = config.role(role);
  if (r != nullptr && !eligible(config.environment, *r, thing)) {
    throw NotInEnvironmentError(thing.id.value + " is outside the environment of role " + role);
  }
  return request_role(config, role, thing, world_size, ctx);
}

LifecycleResult leave(const Configuration& config, const ThingId& thing, std::span<const Thing> world) {
  if (config.state == ConfigState::Dissolved) throw PreconditionError("leave on a dissolved configuration");
  if (!config.things.contains(thing)) throw PreconditionError(thing.value + " is not part of the configuration");
  LifecycleResult r{config, {}, {}, {}};
  for (const auto& inst : r.config.instances_held_by(thing)) unmap(r, inst);
  r.config.things.erase(thing);
  rematch(r, world, {thing});
  return r;
}

LifecycleResult mutate_role(const Configuration& config, const std::string& role_name,
                            const std::vector<ServiceSpec>& added, std::span<const Thing> world) {
  if (config.state == ConfigState::Dissolved) throw PreconditionError("mutate_role on a dissolved configuration");
  LifecycleResult r{config, {}, {}, {}};
  Role* role = r.config.role(role_name);
  if (role == nullptr) throw InvalidRoleError(role_name, {"unknown-role"});
  if (added.empty()) return r;

  Role next = *role;
  next.services.insert(next.services.end(), added.begin(), added.end());
  const auto report = validate_role(next);
  if (!report.ok()) {
    std::vector<std::string> codes;
    for (const auto& v : report.violations) codes.push_back(v.code);
    throw InvalidRoleError(role_name, std::move(codes));
  }
  *role = next;

  std::vector<RoleInstanceId> vacated;
  for (const auto& inst : r.config.instances_of(role_name)) {
    const Thing* t = find_thing(world, r.config.delta.at(inst));
    if (t == nullptr || !eligible(r.config.environment, next, *t) || !feasible(next, *t)) {
      unmap(r, inst);
      vacated.push_back(inst);
    }
  }
  std::set<ThingId> displaced;
  for (const auto& [_, tid] : r.removed) displaced.insert(tid);

  std::vector<const Thing*> order;
  for (const auto& t : world) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Thing* a, const Thing* b) { return a->id < b->id; });
  for (const auto& inst : vacated) {
    for (const Thing* t : order) {
      if (displaced.contains(t->id) || !may_hold(r.config, next, *t)) continue;
      const auto held = r.config.instances_held_by(t->id);
      const bool holds_this = std::any_of(held.begin(), held.end(), [&](const auto& h) { return h.role == role_name; });
      if (holds_this || (!r.config.policy.allow_multi_role && !held.empty())) continue;
      map_instance(r, inst, t->id);
      break;
    }
  }
  for (const auto& tid : displaced) {
    if (r.config.instances_held_by(tid).empty()) {
      const Thing* t = find_thing(world, tid);
      if (t == nullptr || !r.config.environment.satisfied_by(*t)) r.config.things.erase(tid);
    }
  }
  rematch(r, world, displaced);
  return r;
}

MembershipChange refresh_membership(const Configuration& config, const ThingId& thing, std::span<const Thing> world) {
  MembershipChange out{LifecycleResult{config, {}, {}, {}}, false, false};
  const Thing* t = find_thing(world, thing);
  if (t == nullptr || config.state == ConfigState::Dissolved) return out;
  const bool inside = config.environment.satisfied_by(*t);
  const auto held = config.instances_held_by(thing);

  if (!config.things.contains(thing)) {
    if (inside) {
      out.result.config.things.insert(thing);
      out.entered = true;
    }
    return out;
  }
  if (held.empty()) {
    if (!inside) out.result.config.things.erase(thing);
    return out;
  }
  const bool keeps_all = std::all_of(held.begin(), held.end(), [&](const RoleInstanceId& inst) {
    return eligible(config.environment, *config.role(inst.role), *t);
  });
  if (keeps_all) return out;
  out.result = leave(config, thing, world);
  out.left = true;
  return out;
}

std::vector<std::string> check_operational_invariant(const Configuration& config, std::span<const Thing> world) {
  std::vector<std::string> out;
  if (config.state != ConfigState::Operational) return out;
  for (const auto& name : config.unmapped_compulsory()) out.push_back("compulsory role " + name + " is unmapped");
  for (const auto& [inst, tid] : config.delta) {
    const Role* role = config.role(inst.role);
    const Thing* t = find_thing(world, tid);
    if (role == nullptr) {
      out.push_back(inst.str() + " names an unknown role");
    } else if (t == nullptr) {
      out.push_back(inst.str() + " is mapped to missing thing " + tid.value);
    } else if (!feasible(*role, *t) || !eligible(config.environment, *role, *t)) {
      out.push_back(inst.str() + " is mapped to infeasible thing " + tid.value);
    }
    if (!config.things.contains(tid)) out.push_back(tid.value + " holds " + inst.str() + " but is not in T");
  }
  return out;
}

}  // namespace emergent
