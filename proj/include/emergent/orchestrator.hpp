#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emergent/context.hpp"
#include "emergent/lifecycle.hpp"
#include "emergent/netsim.hpp"
#include "emergent/protocol.hpp"
#include "emergent/scenario.hpp"
#include "emergent/trace.hpp"

namespace emergent {

struct ManagedConfig {
  std::string id;
  std::size_t goal_index = 0;
  std::optional<std::size_t> template_index;
  Configuration config;
  ThingId host;
  ThingId coordinator;
  bool formed = false;
  // Auction winners collected before formation completes.
  std::map<RoleInstanceId, ThingId> pending;
};

// Drives one scenario on one simulator: formation, handshakes, auctions,
// context ingestion, moves and service calls, all traced.
class Orchestrator {
 public:
  using Observer = std::function<void(const Orchestrator&, const SimEvent&)>;

  Orchestrator(ScenarioDoc doc, std::uint64_t seed);
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // Schedules the document and runs until the queue drains or the clock
  // would pass max_time_ms.
  Trace run(SimTime max_time_ms);

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  const Simulator& sim() const { return sim_; }
  const std::map<std::string, ManagedConfig>& configs() const { return configs_; }
  const ContextState* context(const std::string& user) const;
  const ScenarioDoc& doc() const { return doc_; }

 private:
  void schedule_document();
  void on_script(const ScriptAction& action);
  void on_signal(const Signal& signal);
  void on_move(const ThingId& thing);
  void form(std::size_t goal_index);
  void run_auctions(const std::string& cid, std::size_t next_role);
  void finish_formation(ManagedConfig& mc, const std::map<RoleInstanceId, ThingId>& delta, const std::string& via);
  void fail_formation(ManagedConfig& mc, const std::string& reason);
  void apply(ManagedConfig& mc, const LifecycleResult& r, const std::string& reason, const std::string& via,
             const std::optional<ThingId>& leaver);
  void refresh_coordinator(ManagedConfig& mc);
  void grant(ManagedConfig& mc, const RoleInstanceId& inst, const ThingId& thing, const std::string& via);
  void react_to_activity(const std::string& user, const std::string& tag);
  void request(const ThingId& thing, const std::string& cid, const std::string& role);
  void offer(ManagedConfig& mc, const ThingId& target, const std::string& role);
  void invoke(const InvokeAction& action);
  void leave_message(const LeavePayload& p, const ThingId& from);
  RoleDecision decide(const RoleRequestPayload& req, const ThingId& from, bool via_offer);
  InvocationStatus provider_check(const ServiceCallPayload& call, const ThingId& provider);
  ContextState& context_for(const std::string& user);
  ManagedConfig* find(const std::string& cid);
  ManagedConfig* active(const std::string& cid);

  ScenarioDoc doc_;
  Simulator sim_;
  ProtocolEngine engine_;
  std::vector<std::function<void()>> actions_;
  std::map<std::string, ManagedConfig> configs_;
  std::vector<std::string> config_order_;
  std::map<std::string, SignalAggregator> aggregators_;
  std::map<std::string, std::vector<Event>> history_;
  std::map<std::string, std::set<std::tuple<std::string, SimTime, SimTime>>> recognized_;
  std::map<std::string, ContextState> contexts_;
  Observer observer_;
  bool scheduled_ = false;
};

// run(scenario, seed, max_time_ms). Throws ValidationError for an invalid
// document.
Trace run_scenario(const ScenarioDoc& doc, std::uint64_t seed, SimTime max_time_ms);

}  // namespace emergent
