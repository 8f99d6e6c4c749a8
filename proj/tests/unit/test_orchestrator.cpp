#include <gtest/gtest.h>

#include "emergent/errors.hpp"
#include "emergent/orchestrator.hpp"

using namespace emergent;

namespace {

ScenarioDoc shipped(const std::string& name) {
  return load_scenario(std::string(EMERGENT_SCENARIO_DIR) + "/" + name + ".json");
}

Trace without_messages(const Trace& t) {
  Trace out;
  for (const auto& r : t) {
    if (r.kind != TraceKind::MsgSent && r.kind != TraceKind::MsgDelivered && r.kind != TraceKind::MsgDropped) {
      out.push_back(r);
    }
  }
  return out;
}

std::ptrdiff_t find(const Trace& t, TraceKind kind, const std::map<std::string, std::string>& fields,
                    std::size_t from = 0) {
  for (std::size_t i = from; i < t.size(); ++i) {
    if (t[i].kind != kind) continue;
    bool ok = true;
    for (const auto& [k, v] : fields) ok = ok && t[i].str(k) == v;
    if (ok) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

}  // namespace

TEST(Orchestrator, MeshPresenterStory) {
  const Trace t = without_messages(run_scenario(shipped("mesh_presenter"), 0, 600000));
  const auto formed = find(t, TraceKind::ConfigFormed, {{"classification", "Hybrid"}, {"coordinator", "tablet-A"}});
  const auto meeting = find(t, TraceKind::ActivityRecognized, {{"user", "bob"}, {"tag", "in_meeting"}});
  const auto granted = find(t, TraceKind::RoleGranted, {{"role", "reviewer"}, {"thing", "phone-B"}});
  const auto shared =
      find(t, TraceKind::ServiceInvoked, {{"service", "share_presentation"}, {"status", "Ok"}, {"caller", "reviewer#0"}});
  const auto left = find(t, TraceKind::ThingLeft, {{"thing", "phone-B"}});
  const auto gone = find(t, TraceKind::ThingLeft, {{"thing", "tablet-A"}});
  const auto dissolved = find(t, TraceKind::ConfigStateChanged, {{"to", "Dissolved"}});
  ASSERT_GE(formed, 0);
  EXPECT_LT(formed, meeting);
  EXPECT_LT(meeting, granted);
  EXPECT_LT(granted, shared);
  EXPECT_LT(shared, left);
  EXPECT_LT(left, gone);
  EXPECT_LT(gone, dissolved);
  // Nothing changed state between the reviewer leaving and the presenter leaving.
  EXPECT_EQ(find(t, TraceKind::ConfigStateChanged, {}, static_cast<std::size_t>(left)),
            find(t, TraceKind::ConfigStateChanged, {}, static_cast<std::size_t>(gone)));
}

TEST(Orchestrator, PreconditionAndEnvironmentDenials) {
  const Trace t = run_scenario(shipped("mesh_presenter"), 0, 600000);
  EXPECT_GE(find(t, TraceKind::RoleDenied, {{"thing", "phone-C"}, {"reason", "PreconditionUnmet"}}), 0);
  EXPECT_GE(find(t, TraceKind::RoleDenied, {{"thing", "laptop-R"}, {"reason", "NotInEnvironment"}}), 0);
}

TEST(Orchestrator, EnteringThingReceivesOffer) {
  const Trace t = run_scenario(shipped("mesh_presenter"), 0, 600000);
  const auto offer = find(t, TraceKind::MsgSent, {{"msg", "RoleOffer"}, {"to", "phone-D"}});
  ASSERT_GE(offer, 0);
  EXPECT_EQ(t[static_cast<std::size_t>(offer)].at_ms, 7000);
  EXPECT_GE(find(t, TraceKind::RoleDenied, {{"thing", "phone-D"}, {"reason", "Declined"}, {"via", "offer"}}), 0);
}

TEST(Orchestrator, AuctionAssignsBestBiddersAndRematchesOnMove) {
  const Trace t = without_messages(run_scenario(shipped("qos_auction"), 0, 600000));
  EXPECT_GE(find(t, TraceKind::RoleGranted, {{"role", "display"}, {"thing", "projector"}, {"via", "auction"}}), 0);
  EXPECT_GE(find(t, TraceKind::RoleGranted, {{"role", "speaker"}, {"thing", "soundbar"}, {"via", "auction"}}), 0);
  const auto moved = find(t, TraceKind::ThingLeft, {{"thing", "projector"}, {"reason", "moved_out"}});
  const auto rematched = find(t, TraceKind::RoleGranted, {{"role", "display"}, {"via", "rematch"}});
  ASSERT_GE(moved, 0);
  EXPECT_LT(moved, rematched);
  EXPECT_GE(find(t, TraceKind::ConfigStateChanged, {{"to", "Operational"}, {"reason", "rematched"}}), 0);
  EXPECT_GE(find(t, TraceKind::ConfigStateChanged, {{"to", "Dissolved"}}), 0);
}

TEST(Orchestrator, RemoteReviewerJoinsAfterMutation) {
  const Trace t = without_messages(run_scenario(shipped("remote_reviewer"), 0, 600000));
  const auto denied = find(t, TraceKind::RoleDenied, {{"thing", "laptop-R"}, {"reason", "NotInEnvironment"}});
  const auto granted = find(t, TraceKind::RoleGranted, {{"thing", "laptop-R"}, {"role", "reviewer"}});
  ASSERT_GE(denied, 0);
  EXPECT_LT(denied, granted);
  EXPECT_GE(find(t, TraceKind::ServiceInvoked, {{"caller", "reviewer#1"}, {"status", "Ok"}}), 0);
  EXPECT_LT(find(t, TraceKind::ConfigStateChanged, {{"to", "Dissolved"}}), 0);
}

TEST(Orchestrator, JoggingActivityIsInferred) {
  Orchestrator orch(shipped("jogging_in_park"), 0);
  const Trace t = orch.run(600000);
  std::vector<std::string> events;
  for (const auto& r : t) {
    if (r.kind == TraceKind::EventEmitted) events.push_back(r.str("tag"));
  }
  EXPECT_EQ(events, (std::vector<std::string>{"accelerating_speed", "entered_park", "increased_speed"}));
  ASSERT_NE(orch.context("frank"), nullptr);
  EXPECT_EQ(orch.context("frank")->statements.at("activity").value, "jogging_in_park");
  EXPECT_EQ(orch.context("frank")->statements.at("activity").provenance, Provenance::Inferred);
}

TEST(Orchestrator, ObserverSeesInvariantHoldEveryStep) {
  for (const auto& name : {"mesh_presenter", "qos_auction", "remote_reviewer"}) {
    Orchestrator orch(shipped(name), 5);
    std::size_t steps = 0;
    orch.set_observer([&](const Orchestrator& o, const SimEvent&) {
      ++steps;
      const auto world = o.sim().world_snapshot();
      for (const auto& [id, mc] : o.configs()) {
        EXPECT_TRUE(check_operational_invariant(mc.config, world).empty()) << name << " " << id;
      }
    });
    orch.run(600000);
    EXPECT_GT(steps, 0u);
  }
}

TEST(Orchestrator, NoTemplateGoalIsTracedAsDissolved) {
  ScenarioDoc doc = shipped("mesh_presenter");
  doc.goals[0].goal = Goal{"alice", "breakfast", {"brew_coffee"}};
  doc.services.push_back("brew_coffee");
  doc.world_events.clear();
  const Trace t = run_scenario(doc, 0, 600000);
  EXPECT_GE(find(t, TraceKind::ConfigStateChanged, {{"config", "C1"}, {"to", "Dissolved"}, {"reason", "no_template"}}), 0);
  EXPECT_LT(find(t, TraceKind::ConfigFormed, {}), 0);
}

TEST(Orchestrator, InfeasibleGoalIsTracedAsDissolved) {
  ScenarioDoc doc = shipped("mesh_presenter");
  doc.things.erase(doc.things.begin());  // tablet-A
  doc.goals[0].host.reset();
  doc.world_events.clear();
  const Trace t = run_scenario(doc, 0, 600000);
  EXPECT_GE(find(t, TraceKind::ConfigStateChanged, {{"reason", "infeasible"}}), 0);
}

TEST(Orchestrator, UnmappedCallerIsRecorded) {
  ScenarioDoc doc = shipped("mesh_presenter");
  doc.world_events = {{100, InvokeAction{"phone-C", "C1", "share_presentation", ""}}};
  const Trace t = run_scenario(doc, 0, 600000);
  EXPECT_GE(find(t, TraceKind::ServiceInvoked, {{"status", "NotMapped"}, {"decision", "none"}}), 0);
}

TEST(Orchestrator, ConfigsAreExposed) {
  Orchestrator orch(shipped("remote_reviewer"), 0);
  orch.run(600000);
  ASSERT_EQ(orch.configs().size(), 1u);
  const auto& mc = orch.configs().at("C1");
  EXPECT_TRUE(mc.formed);
  EXPECT_EQ(mc.coordinator, ThingId("tablet-A"));
  EXPECT_EQ(mc.config.state, ConfigState::Operational);
  EXPECT_TRUE(mc.config.role("reviewer")->remote_capable());
}

TEST(Orchestrator, SameSeedSameTrace) {
  const auto doc = shipped("qos_auction");
  EXPECT_EQ(serialize_trace(run_scenario(doc, 7, 600000)), serialize_trace(run_scenario(doc, 7, 600000)));
}
