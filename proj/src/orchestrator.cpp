#include "emergent/orchestrator.hpp"

#include <algorithm>

#include "emergent/errors.hpp"
#include "emergent/matcher.hpp"

namespace emergent {

namespace {

LinkModel links_of(const SimSettings& s) {
  LinkModel m;
  m.default_latency_ms = s.default_latency_ms;
  m.drop_probability = s.drop_probability;
  for (const auto& l : s.links) m.latency_ms[{l.from, l.to}] = l.latency_ms;
  return m;
}

std::optional<RoleInstanceId> parse_instance(const std::string& s) {
  const auto hash = s.rfind('#');
  if (hash == std::string::npos) return std::nullopt;
  try {
    return RoleInstanceId{s.substr(0, hash), static_cast<std::uint32_t>(std::stoul(s.substr(hash + 1)))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::set<ThingId> holders(const Configuration& c) {
  std::set<ThingId> out;
  for (const auto& [_, t] : c.delta) out.insert(t);
  return out;
}

}  // namespace

Orchestrator::Orchestrator(ScenarioDoc doc, std::uint64_t seed)
    : doc_(std::move(doc)), sim_(doc_.world(), links_of(doc_.sim), seed), engine_(sim_) {
  for (const auto& t : doc_.things) engine_.set_script(t.thing.id, t.script);
  engine_.set_request_handler(
      [this](const RoleRequestPayload& req, const ThingId& from, bool via_offer) { return decide(req, from, via_offer); });
  engine_.set_provider_check(
      [this](const ServiceCallPayload& call, const ThingId& provider) { return provider_check(call, provider); });
  engine_.set_leave_handler([this](const LeavePayload& p, const ThingId& from) { leave_message(p, from); });

  SimHandlers h;
  h.on_deliver = [this](const Message& msg, const ThingId& to) { engine_.on_deliver(msg, to); };
  h.on_signal = [this](const Signal& s) { on_signal(s); };
  h.on_move = [this](const ThingId& id, const Point&, const Point&) { on_move(id); };
  h.on_script = [this](const ScriptAction& a) { on_script(a); };
  h.after_step = [this](const SimEvent& ev) {
    if (observer_) observer_(*this, ev);
  };
  sim_.set_handlers(std::move(h));
}

const ContextState* Orchestrator::context(const std::string& user) const {
  auto it = contexts_.find(user);
  return it == contexts_.end() ? nullptr : &it->second;
}

ContextState& Orchestrator::context_for(const std::string& user) {
  return contexts_.try_emplace(user, ContextState{user, {}, {}}).first->second;
}

ManagedConfig* Orchestrator::find(const std::string& cid) {
  auto it = configs_.find(cid);
  return it == configs_.end() ? nullptr : &it->second;
}

ManagedConfig* Orchestrator::active(const std::string& cid) {
  ManagedConfig* mc = find(cid);
  if (mc == nullptr || !mc->formed || mc->config.state == ConfigState::Dissolved) return nullptr;
  return mc;
}

void Orchestrator::schedule_document() {
  scheduled_ = true;
  for (std::size_t i = 0; i < doc_.goals.size(); ++i) {
    actions_.push_back([this, i] { form(i); });
    sim_.schedule(doc_.goals[i].at_ms, ScriptAction{"goal", actions_.size() - 1});
  }
  for (const auto& ev : doc_.world_events) {
    if (const auto* m = std::get_if<MoveAction>(&ev.action)) {
      sim_.schedule(ev.at_ms, ThingMove{m->thing, m->to});
      continue;
    }
    if (const auto* s = std::get_if<SignalAction>(&ev.action)) {
      sim_.schedule(ev.at_ms, SignalEmit{s->signal});
      continue;
    }
    WorldAction action = ev.action;
    actions_.push_back([this, action] {
      std::visit(
          [this](const auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, RequestRoleAction>) {
              request(a.thing, a.config, a.role);
            } else if constexpr (std::is_same_v<A, LeaveAction>) {
              if (ManagedConfig* mc = active(a.config)) engine_.send_leave(a.thing, mc->coordinator, a.config);
            } else if constexpr (std::is_same_v<A, InvokeAction>) {
              invoke(a);
            } else if constexpr (std::is_same_v<A, StatementAction>) {
              auto& ctx = context_for(a.user);
              ctx = update_context(ctx, SensedStatement{a.key, a.value, sim_.now()});
              if (a.key == kActivityKey) {
                sim_.record(TraceKind::ActivityRecognized, {{"user", a.user},
                                                            {"tag", a.value},
                                                            {"provenance", to_string(Provenance::Sensed)},
                                                            {"start", sim_.now()},
                                                            {"end", sim_.now()}});
                react_to_activity(a.user, a.value);
              }
            } else if constexpr (std::is_same_v<A, MutateRoleAction>) {
              ManagedConfig* mc = active(a.config);
              if (mc == nullptr) return;
              LifecycleResult r;
              try {
                r = mutate_role(mc->config, a.role, a.services, sim_.world_snapshot());
              } catch (const InvalidRoleError&) {
                return;
              }
              apply(*mc, r, "mutated", "mutation", std::nullopt);
            }
          },
          action);
    });
    sim_.schedule(ev.at_ms, ScriptAction{"world", actions_.size() - 1});
  }
}

Trace Orchestrator::run(SimTime max_time_ms) {
  if (!scheduled_) {
    schedule_document();
    if (sim_.has_pending()) {
      sim_.record(TraceKind::RunStarted, {{"scenario", doc_.name}, {"seed", sim_.seed()}});
    }
  }
  sim_.run(max_time_ms);
  return sim_.take_trace();
}

void Orchestrator::on_script(const ScriptAction& a) { actions_.at(a.action)(); }

void Orchestrator::form(std::size_t goal_index) {
  const auto& tg = doc_.goals[goal_index];
  ManagedConfig mc;
  mc.id = "C" + std::to_string(goal_index + 1);
  mc.goal_index = goal_index;
  if (tg.host) {
    mc.host = *tg.host;
  } else {
    mc.host = sim_.things().begin()->first;
    for (const auto& [id, t] : sim_.things()) {
      if (t.user() == tg.goal.user) {
        mc.host = id;
        break;
      }
    }
  }
  mc.coordinator = mc.host;
  config_order_.push_back(mc.id);
  const std::string cid = mc.id;
  ManagedConfig& slot = configs_[cid] = std::move(mc);

  const auto world = sim_.world_snapshot();
  FormationPlan plan;
  try {
    plan = plan_formation(tg.goal, doc_.templates, world);
  } catch (const NoTemplateError&) {
    fail_formation(slot, "no_template");
    return;
  }
  const auto& tpl = doc_.templates[plan.template_index];
  slot.template_index = plan.template_index;
  slot.config = assemble_configuration(tpl, plan.things, {});
  slot.config.state = ConfigState::Forming;

  if (tpl.auction_assignment) {
    run_auctions(cid, 0);
    return;
  }
  MatchResult res;
  try {
    res = compute_delta(compulsory_problem(tpl, plan.candidates));
  } catch (const InfeasibleError&) {
    fail_formation(slot, "infeasible");
    return;
  }
  finish_formation(slot, res.delta, "formation");
}

void Orchestrator::run_auctions(const std::string& cid, std::size_t next_role) {
  ManagedConfig& mc = configs_.at(cid);
  const auto roles = compulsory_roles(mc.config.roles);
  if (next_role == roles.size()) {
    const auto delta = mc.pending;
    mc.pending.clear();
    finish_formation(mc, delta, "auction");
    return;
  }
  const Role& role = *roles[next_role];
  std::set<ThingId> taken;
  for (const auto& [_, t] : mc.pending) taken.insert(t);
  std::vector<ThingId> candidates;
  for (const auto& id : mc.config.things) {
    const Thing& t = sim_.thing(id);
    if (!mc.config.policy.allow_multi_role && taken.contains(id)) continue;
    if (feasible(role, t) && eligible(mc.config.environment, role, t)) candidates.push_back(id);
  }
  const auto& tpl = doc_.templates[*mc.template_index];
  const std::string name = role.name;
  engine_.start_auction(mc.host, name, candidates, sim_.now() + tpl.bid_window_ms,
                        [this, cid, name, next_role](const AuctionOutcome& o) {
                          ManagedConfig& m = configs_.at(cid);
                          if (o.state != AuctionState::Awarded) {
                            fail_formation(m, "auction_failed");
                            return;
                          }
                          m.pending[RoleInstanceId{name, 0}] = *o.winner;
                          run_auctions(cid, next_role + 1);
                        });
}

void Orchestrator::finish_formation(ManagedConfig& mc, const std::map<RoleInstanceId, ThingId>& delta,
                                    const std::string& via) {
  mc.config.delta = delta;
  mc.config.state = ConfigState::Operational;
  mc.formed = true;
  refresh_coordinator(mc);
  mc.config.delta.clear();
  const auto& tpl = doc_.templates[*mc.template_index];
  sim_.record(TraceKind::ConfigFormed, {{"config", mc.id},
                                        {"purpose", mc.config.purpose.tag},
                                        {"template", tpl.name},
                                        {"classification", to_string(classify(mc.config))},
                                        {"coordinator", mc.coordinator.value}});
  for (const auto& [inst, thing] : delta) grant(mc, inst, thing, via);
}

void Orchestrator::fail_formation(ManagedConfig& mc, const std::string& reason) {
  mc.config.state = ConfigState::Dissolved;
  mc.config.delta.clear();
  mc.pending.clear();
  sim_.record(TraceKind::ConfigStateChanged, {{"config", mc.id},
                                              {"from", to_string(ConfigState::Forming)},
                                              {"to", to_string(ConfigState::Dissolved)},
                                              {"reason", reason}});
}

void Orchestrator::refresh_coordinator(ManagedConfig& mc) {
  for (const auto* role : compulsory_roles(mc.config.roles)) {
    const auto insts = mc.config.instances_of(role->name);
    if (!insts.empty()) {
      mc.coordinator = mc.config.delta.at(insts.front());
      return;
    }
  }
  mc.coordinator = mc.host;
}

void Orchestrator::grant(ManagedConfig& mc, const RoleInstanceId& inst, const ThingId& thing, const std::string& via) {
  const bool first = mc.config.instances_held_by(thing).empty();
  mc.config.delta[inst] = thing;
  mc.config.things.insert(thing);
  sim_.record(TraceKind::RoleGranted, {{"config", mc.id},
                                       {"role", inst.role},
                                       {"instance", inst.str()},
                                       {"thing", thing.value},
                                       {"via", via}});
  if (first) sim_.record(TraceKind::ThingJoined, {{"config", mc.id}, {"thing", thing.value}});
}

void Orchestrator::apply(ManagedConfig& mc, const LifecycleResult& r, const std::string& reason,
                         const std::string& via, const std::optional<ThingId>& leaver) {
  const Configuration before = mc.config;
  mc.config = r.config;
  const auto held_before = holders(before);
  const auto held_after = holders(mc.config);
  std::vector<ThingId> dropped;
  for (const auto& t : held_before) {
    if (!held_after.contains(t) && (!leaver || t != *leaver)) dropped.push_back(t);
  }
  const bool dissolved = !r.transitions.empty() && r.transitions.back() == ConfigState::Dissolved;

  auto left = [&](const ThingId& t, const std::string& why) {
    sim_.record(TraceKind::ThingLeft, {{"config", mc.id}, {"thing", t.value}, {"reason", why}});
  };
  bool added_done = false;
  auto emit_added = [&] {
    if (added_done) return;
    added_done = true;
    std::set<ThingId> joined;
    for (const auto& [inst, t] : r.added) {
      if (!mc.config.delta.contains(inst) || mc.config.delta.at(inst) != t) continue;
      sim_.record(TraceKind::RoleGranted, {{"config", mc.id},
                                           {"role", inst.role},
                                           {"instance", inst.str()},
                                           {"thing", t.value},
                                           {"via", via == "mutation" ? via : "rematch"}});
      if (!held_before.contains(t) && joined.insert(t).second) {
        sim_.record(TraceKind::ThingJoined, {{"config", mc.id}, {"thing", t.value}});
      }
    }
  };

  if (leaver) left(*leaver, reason);
  if (!dissolved) {
    for (const auto& t : dropped) left(t, reason);
  }
  ConfigState prev = before.state;
  for (const auto s : r.transitions) {
    if (s != ConfigState::Forming) emit_added();
    const char* why = s == ConfigState::Forming       ? "compulsory_unmapped"
                      : s == ConfigState::Operational ? "rematched"
                                                      : "no_substitute";
    sim_.record(TraceKind::ConfigStateChanged,
                {{"config", mc.id}, {"from", to_string(prev)}, {"to", to_string(s)}, {"reason", why}});
    prev = s;
  }
  emit_added();
  if (dissolved) {
    for (const auto& t : dropped) left(t, "dissolved");
  }
  refresh_coordinator(mc);
}

void Orchestrator::request(const ThingId& thing, const std::string& cid, const std::string& role) {
  ManagedConfig* mc = find(cid);
  if (mc == nullptr || !mc->formed) {
    sim_.record(TraceKind::RoleDenied, {{"config", cid},
                                        {"role", role},
                                        {"thing", thing.value},
                                        {"reason", mc == nullptr || mc->config.state != ConfigState::Dissolved
                                                       ? "NoConfiguration"
                                                       : to_string(DenyReason::Dissolved)},
                                        {"via", "request"}});
    return;
  }
  engine_.request_role(thing, mc->coordinator, cid, role, nullptr);
}

void Orchestrator::offer(ManagedConfig& mc, const ThingId& target, const std::string& role) {
  if (target == mc.coordinator) return;
  const std::string cid = mc.id;
  engine_.offer_role(mc.coordinator, target, cid, role, doc_.sim.handshake_timeout_ms,
                     [this, cid, target, role](const OfferOutcome& o) {
                       // Grants and admission denials are traced by the request handler.
                       if (o.accepted || !o.reason) return;
                       if (*o.reason != DenyReason::Declined && *o.reason != DenyReason::Timeout) return;
                       sim_.record(TraceKind::RoleDenied, {{"config", cid},
                                                           {"role", role},
                                                           {"thing", target.value},
                                                           {"reason", to_string(*o.reason)},
                                                           {"via", "offer"}});
                     });
}

RoleDecision Orchestrator::decide(const RoleRequestPayload& req, const ThingId& from, bool via_offer) {
  const std::string via = via_offer ? "offer" : "request";
  ManagedConfig* mc = find(req.config_id);
  RoleDecision d;
  if (mc == nullptr) {
    d = RoleDecision{false, DenyReason::UnknownRole, std::nullopt};
  } else {
    const Thing& thing = sim_.thing(from);
    d = decide_role_request(mc->config, req.role, thing, sim_.things().size(), context(thing.user()));
  }
  if (d.granted) {
    grant(*mc, *d.instance, from, via);
  } else {
    sim_.record(TraceKind::RoleDenied, {{"config", req.config_id},
                                        {"role", req.role},
                                        {"thing", from.value},
                                        {"reason", to_string(*d.reason)},
                                        {"via", via}});
  }
  return d;
}

void Orchestrator::leave_message(const LeavePayload& p, const ThingId& from) {
  ManagedConfig* mc = active(p.config_id);
  if (mc == nullptr || !mc->config.things.contains(from)) return;
  apply(*mc, leave(mc->config, from, sim_.world_snapshot()), "left", "rematch", from);
}

void Orchestrator::on_move(const ThingId& thing) {
  const auto world = sim_.world_snapshot();
  for (const auto& cid : config_order_) {
    ManagedConfig* mc = active(cid);
    if (mc == nullptr) continue;
    MembershipChange ch = refresh_membership(mc->config, thing, world);
    if (ch.left) {
      apply(*mc, ch.result, "moved_out", "rematch", thing);
      continue;
    }
    mc->config = ch.result.config;
    const auto& tpl = doc_.templates[*mc->template_index];
    if (ch.entered && tpl.offer_on_enter) offer(*mc, thing, *tpl.offer_on_enter);
  }
}

void Orchestrator::on_signal(const Signal& signal) {
  const std::string user = sim_.has_thing(signal.source) ? sim_.thing(signal.source).user() : signal.source.value;
  auto& agg = aggregators_.try_emplace(user, doc_.event_rules).first->second;
  const auto events = agg.push(signal);
  if (events.empty()) return;
  auto& history = history_[user];
  for (const auto& ev : events) {
    sim_.record(TraceKind::EventEmitted, {{"user", user},
                                          {"source", ev.source.value},
                                          {"tag", ev.tag},
                                          {"window_start", ev.window_start},
                                          {"window_end", ev.window_end}});
    history.push_back(ev);
  }
  auto& seen = recognized_[user];
  for (const auto& a : infer_activity(history, doc_.activity_rules)) {
    if (!seen.insert({a.tag, a.start, a.end}).second) continue;
    auto& ctx = context_for(user);
    ctx = update_context(ctx, a);
    sim_.record(TraceKind::ActivityRecognized, {{"user", user},
                                                {"tag", a.tag},
                                                {"provenance", to_string(Provenance::Inferred)},
                                                {"start", a.start},
                                                {"end", a.end}});
    react_to_activity(user, a.tag);
  }
}

void Orchestrator::react_to_activity(const std::string& user, const std::string& tag) {
  for (const auto& [id, t] : sim_.things()) {
    if (t.user() != user) continue;
    const auto& reactions = engine_.script(id).on_activity;
    auto it = reactions.find(tag);
    if (it == reactions.end()) continue;
    for (const auto& cid : config_order_) {
      ManagedConfig* mc = active(cid);
      if (mc == nullptr || mc->config.role(it->second) == nullptr) continue;
      const auto held = mc->config.instances_held_by(id);
      if (std::any_of(held.begin(), held.end(), [&](const auto& i) { return i.role == it->second; })) continue;
      request(id, cid, it->second);
    }
  }
}

void Orchestrator::invoke(const InvokeAction& a) {
  auto record = [&](const std::string& caller, const std::string& provider, const std::string& status) {
    sim_.record(TraceKind::ServiceInvoked, {{"config", a.config},
                                            {"service", a.service},
                                            {"caller", caller},
                                            {"provider", provider},
                                            {"status", status},
                                            {"output", ""},
                                            {"decision", "none"}});
  };
  ManagedConfig* mc = active(a.config);
  if (mc == nullptr) {
    record(a.caller.value, "", "NoConfiguration");
    return;
  }
  const Configuration& c = mc->config;
  const auto held = c.instances_held_by(a.caller);
  if (held.empty()) {
    record(a.caller.value, "", "NotMapped");
    return;
  }
  const RoleInstanceId* caller = nullptr;
  for (const auto& inst : held) {
    if (c.role(inst.role)->expected().contains(a.service)) {
      caller = &inst;
      break;
    }
  }
  if (caller == nullptr) {
    record(held.front().str(), "", to_string(InvocationStatus::NotExposed));
    return;
  }
  std::optional<RoleInstanceId> provider;
  for (const auto& [inst, t] : c.delta) {
    if (t != a.caller && c.role(inst.role)->provided().contains(a.service)) {
      provider = inst;
      break;
    }
  }
  if (!provider) {
    const bool declared = std::any_of(c.roles.begin(), c.roles.end(),
                                      [&](const Role& r) { return r.provided().contains(a.service); });
    record(caller->str(), "",
           to_string(declared ? InvocationStatus::ProviderGone : InvocationStatus::NotProvided));
    return;
  }
  const RoleInstanceId ci = *caller;
  const RoleInstanceId pi = *provider;
  const ThingId caller_thing = a.caller;
  const std::string cid = a.config;
  const ServiceTypeId service = a.service;
  engine_.invoke_service(a.caller, c.delta.at(pi), cid, service, ci, pi, a.args,
                         [this, ci, pi, caller_thing, cid, service](const ServiceResultPayload& res) {
                           const bool ok = res.status == to_string(InvocationStatus::Ok);
                           const std::string decision =
                               !ok ? "none" : engine_.script(caller_thing).broadcast_content ? "broadcast" : "withhold";
                           sim_.record(TraceKind::ServiceInvoked, {{"config", cid},
                                                                   {"service", service},
                                                                   {"caller", ci.str()},
                                                                   {"provider", pi.str()},
                                                                   {"status", res.status},
                                                                   {"output", res.output},
                                                                   {"decision", decision}});
                         });
}

InvocationStatus Orchestrator::provider_check(const ServiceCallPayload& call, const ThingId& provider) {
  ManagedConfig* mc = active(call.config_id);
  const auto caller = parse_instance(call.caller_instance);
  const auto target = parse_instance(call.provider_instance);
  if (mc == nullptr || !caller || !target) return InvocationStatus::ProviderGone;
  InvocationStatus s;
  try {
    s = check_invocation(mc->config, *caller, *target, call.service);
  } catch (const PreconditionError&) {
    return InvocationStatus::NotExposed;
  }
  if (s == InvocationStatus::Ok && mc->config.delta.at(*target) != provider) return InvocationStatus::ProviderGone;
  return s;
}

Trace run_scenario(const ScenarioDoc& doc, std::uint64_t seed, SimTime max_time_ms) {
  if (auto problems = validate_scenario(doc); !problems.empty()) throw ValidationError(std::move(problems));
  Orchestrator orch(doc, seed);
  return orch.run(max_time_ms);
}

}  // namespace emergent
