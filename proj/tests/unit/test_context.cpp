#include <gtest/gtest.h>

#include <random>

#include "emergent/context.hpp"
#include "emergent/errors.hpp"

using namespace emergent;

namespace {

const std::vector<Point> kPark = {{100, -50}, {200, -50}, {200, 50}, {100, 50}};

std::vector<EventRule> jogging_event_rules() {
  EventRule accel{"accelerometer", 5000, Aggregate::Mean, 2.0, {}, "accelerating_speed"};
  EventRule park{"gps", 2000, Aggregate::InsideRegion, 0.0, kPark, "entered_park"};
  EventRule speed{"gps", 5000, Aggregate::Delta, 15.0, {}, "increased_speed"};
  return {accel, park, speed};
}

ActivityRule jogging_rule() {
  return ActivityRule{{"accelerating_speed", "entered_park", "increased_speed"}, 30000, "jogging_in_park"};
}

Signal num(const std::string& sensor, SimTime t, double v) { return Signal{"phone-J", sensor, t, v}; }
Signal pos(SimTime t, double x) { return Signal{"phone-J", "gps", t, Point{x, 0}}; }

// Accelerometer ramps up, GPS walks east into the park at 3 m/s, then runs at 8 m/s.
std::vector<Signal> jogging_stream() {
  std::vector<Signal> out;
  for (SimTime t = 0; t <= 6000; t += 1000) out.push_back(num("accelerometer", t, t < 1000 ? 0.5 : 3.0));
  double x = 80;
  for (SimTime t = 1000; t <= 16000; t += 1000) {
    out.push_back(pos(t, x));
    x += t < 11000 ? 3 : 8;
  }
  std::stable_sort(out.begin(), out.end(), [](const Signal& a, const Signal& b) { return a.timestamp < b.timestamp; });
  return out;
}

std::vector<std::string> tags(const std::vector<Event>& evs) {
  std::vector<std::string> out;
  for (const auto& e : evs) out.push_back(e.tag);
  return out;
}

}  // namespace

TEST(AggregateSignals, AcceleratingThenEnteringPark) {
  const auto stream = jogging_stream();
  const auto rules = jogging_event_rules();
  const std::vector<EventRule> first_two(rules.begin(), rules.begin() + 2);
  EXPECT_EQ(tags(aggregate_signals(stream, first_two)), (std::vector<std::string>{"accelerating_speed", "entered_park"}));
}

TEST(AggregateSignals, FullJoggingSequence) {
  const auto evs = aggregate_signals(jogging_stream(), jogging_event_rules());
  EXPECT_EQ(tags(evs), (std::vector<std::string>{"accelerating_speed", "entered_park", "increased_speed"}));
  // Samples at 8000, 9000, 10000 are x = 101, 104, 107, all inside.
  EXPECT_EQ(evs[0].timestamp, 5000);
  EXPECT_EQ(evs[1].timestamp, 10000);
  // 12000: x = 118 against x = 98 at 7000.
  EXPECT_EQ(evs[2].timestamp, 12000);
}

TEST(AggregateSignals, EmptyStream) { EXPECT_TRUE(aggregate_signals({}, jogging_event_rules()).empty()); }

TEST(AggregateSignals, IncompleteWindowEmitsNothing) {
  std::vector<Signal> s;
  for (SimTime t = 0; t <= 1000; t += 250) s.push_back(num("accelerometer", t, 9.0));
  const std::vector<EventRule> rules = {{"accelerometer", 5000, Aggregate::Mean, 2.0, {}, "accelerating_speed"}};
  EXPECT_TRUE(aggregate_signals(s, rules).empty());
}

TEST(AggregateSignals, NonIncreasingTimestampIsMalformed) {
  const std::vector<Signal> s = {num("accelerometer", 10, 1), num("accelerometer", 10, 2)};
  EXPECT_THROW(aggregate_signals(s, jogging_event_rules()), MalformedStreamError);
  SignalAggregator agg(jogging_event_rules());
  agg.push(num("accelerometer", 10, 1));
  EXPECT_THROW(agg.push(num("accelerometer", 5, 1)), MalformedStreamError);
}

TEST(AggregateSignals, RisingEdgeOnly) {
  std::vector<Signal> s;
  for (SimTime t = 0; t <= 20000; t += 1000) s.push_back(num("accelerometer", t, 5.0));
  const std::vector<EventRule> rules = {{"accelerometer", 2000, Aggregate::Max, 2.0, {}, "shake"}};
  EXPECT_EQ(aggregate_signals(s, rules).size(), 1u);
}

TEST(AggregateSignals, IncrementalMatchesBatch) {
  const auto stream = jogging_stream();
  SignalAggregator agg(jogging_event_rules());
  std::vector<Event> incremental;
  for (const auto& s : stream) {
    for (auto& e : agg.push(s)) incremental.push_back(e);
  }
  EXPECT_EQ(incremental, aggregate_signals(stream, jogging_event_rules()));
}

TEST(AggregateSignals, EvidenceLiesInsideWindow) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(0, 5);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<Signal> s;
    SimTime t = 0;
    for (int i = 0; i < 40; ++i) {
      t += 1 + static_cast<SimTime>(rng() % 700);
      s.push_back(num("accelerometer", t, v(rng)));
    }
    const std::vector<EventRule> rules = {{"accelerometer", 1500, Aggregate::Mean, 2.5, {}, "hi"},
                                          {"accelerometer", 900, Aggregate::Delta, 1.0, {}, "up"}};
    for (const auto& e : aggregate_signals(s, rules)) {
      EXPECT_LE(e.window_start, e.timestamp);
      EXPECT_LE(e.timestamp, e.window_end);
      EXPECT_FALSE(e.evidence.empty());
      for (const auto& ref : e.evidence) {
        EXPECT_GE(ref.timestamp, e.window_start);
        EXPECT_LE(ref.timestamp, e.window_end);
      }
    }
  }
}

TEST(AggregateSignals, AppendingLaterSignalsKeepsEarlierEvents) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> v(0, 5);
  const std::vector<EventRule> rules = {{"accelerometer", 1500, Aggregate::Mean, 2.5, {}, "hi"}};
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<Signal> s;
    for (SimTime t = 0; t < 30000; t += 250) s.push_back(num("accelerometer", t, v(rng)));
    const SimTime cut = 500 + static_cast<SimTime>(rng() % 29000);
    std::vector<Signal> prefix;
    for (const auto& x : s) {
      if (x.timestamp <= cut) prefix.push_back(x);
    }
    std::vector<Event> full_prefix;
    for (const auto& e : aggregate_signals(s, rules)) {
      if (e.timestamp <= cut) full_prefix.push_back(e);
    }
    EXPECT_EQ(aggregate_signals(prefix, rules), full_prefix);
  }
}

TEST(AggregateSignals, Deterministic) {
  const auto a = aggregate_signals(jogging_stream(), jogging_event_rules());
  const auto b = aggregate_signals(jogging_stream(), jogging_event_rules());
  EXPECT_EQ(a, b);
}

TEST(PointInPolygon, SquareInteriorAndExterior) {
  EXPECT_TRUE(point_in_polygon({150, 0}, kPark));
  EXPECT_FALSE(point_in_polygon({90, 0}, kPark));
  EXPECT_FALSE(point_in_polygon({150, 60}, kPark));
}

TEST(InferActivity, JoggingInPark) {
  const auto events = aggregate_signals(jogging_stream(), jogging_event_rules());
  const std::vector<ActivityRule> rules = {jogging_rule()};
  const auto acts = infer_activity(events, rules);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0].tag, "jogging_in_park");
  EXPECT_EQ(acts[0].events, (std::vector<std::string>{"accelerating_speed", "entered_park", "increased_speed"}));
  EXPECT_EQ(acts[0].start, events.front().timestamp);
  EXPECT_EQ(acts[0].end, events.back().timestamp);
}

TEST(InferActivity, EmptyEvents) {
  const std::vector<ActivityRule> rules = {jogging_rule()};
  EXPECT_TRUE(infer_activity({}, rules).empty());
}

TEST(InferActivity, NoMatchingRuleYieldsNothing) {
  const std::vector<Event> evs = {{"door_open", 10, 10, 10, "s", {}}, {"light_on", 20, 20, 20, "s", {}}};
  const std::vector<ActivityRule> rules = {jogging_rule()};
  EXPECT_TRUE(infer_activity(evs, rules).empty());
}

TEST(InferActivity, GapIsRespected) {
  const std::vector<Event> evs = {{"a", 0, 0, 0, "s", {}}, {"b", 5000, 5000, 5000, "s", {}}};
  EXPECT_EQ(infer_activity(evs, std::vector<ActivityRule>{{{"a", "b"}, 5000, "ab"}}).size(), 1u);
  EXPECT_TRUE(infer_activity(evs, std::vector<ActivityRule>{{{"a", "b"}, 4999, "ab"}}).empty());
}

TEST(InferActivity, EarlierStartWinsOverlap) {
  const std::vector<Event> evs = {{"a", 0, 0, 0, "s", {}}, {"b", 10, 10, 10, "s", {}}, {"c", 20, 20, 20, "s", {}}};
  const std::vector<ActivityRule> rules = {{{"b", "c"}, 100, "late"}, {{"a", "b"}, 100, "early"}};
  const auto acts = infer_activity(evs, rules);
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0].tag, "early");
}

TEST(InferActivity, WildcardSkipsNonMatchingInterleavedEvents) {
  const std::vector<Event> evs = {
      {"a", 0, 0, 0, "s", {}}, {"noise", 5, 5, 5, "s", {}}, {"b", 10, 10, 10, "s", {}}};
  const auto acts = infer_activity(evs, std::vector<ActivityRule>{{{"a", "*", "b"}, 100, "x"}});
  ASSERT_EQ(acts.size(), 1u);
  EXPECT_EQ(acts[0].events, (std::vector<std::string>{"a", "noise", "b"}));
}

TEST(UpdateContext, ActivityBecomesInferredStatement) {
  const Activity meeting{"in_meeting", 0, 10, {}};
  const auto ctx = update_context(ContextState{"bob", {}, {}}, meeting);
  ASSERT_EQ(ctx.statements.size(), 1u);
  EXPECT_EQ(ctx.statements.at("activity"), (Statement{"in_meeting", 10, Provenance::Inferred}));
}

TEST(UpdateContext, NewerWins) {
  auto ctx = update_context(ContextState{}, SensedStatement{"k", "v1", 5});
  ctx = update_context(ctx, SensedStatement{"k", "v2", 9});
  EXPECT_EQ(ctx.statements.at("k").value, "v2");
  ctx = update_context(ctx, SensedStatement{"k", "v0", 3});
  EXPECT_EQ(ctx.statements.at("k").value, "v2");
}

TEST(UpdateContext, SensedBeatsInferredOnTie) {
  auto ctx = update_context(ContextState{}, Activity{"vI", 0, 7, {}});
  ctx = update_context(ctx, SensedStatement{"activity", "vS", 7});
  EXPECT_EQ(ctx.statements.at("activity").value, "vS");
  // The reverse order keeps the sensed value.
  auto ctx2 = update_context(ContextState{}, SensedStatement{"activity", "vS", 7});
  ctx2 = update_context(ctx2, Activity{"vI", 0, 7, {}});
  EXPECT_EQ(ctx2.statements.at("activity").value, "vS");
}

TEST(UpdateContext, MergeIsIdempotent) {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 200; ++iter) {
    ContextState ctx;
    for (int i = 0; i < 5; ++i) {
      const std::string key = "k" + std::to_string(rng() % 3);
      ctx = update_context(ctx, SensedStatement{key, std::to_string(rng() % 10), static_cast<SimTime>(rng() % 50)});
    }
    const ContextItem item =
        rng() % 2 ? ContextItem{SensedStatement{"k1", "x", static_cast<SimTime>(rng() % 50)}}
                  : ContextItem{Activity{"a", 0, static_cast<SimTime>(rng() % 50), {}}};
    const auto once = update_context(ctx, item);
    EXPECT_EQ(update_context(once, item), once);
  }
}

TEST(ConditionsFromContext, MeetingContextYieldsTrigger) {
  const auto ctx = update_context(ContextState{}, Activity{"in_meeting", 0, 10, {}});
  EXPECT_EQ(conditions_from_context(ctx), (std::set<Condition>{{ConditionKind::ActivityRecognized, "in_meeting"}}));
}

TEST(ConditionsFromContext, EmptyContextYieldsNothing) { EXPECT_TRUE(conditions_from_context(ContextState{}).empty()); }

TEST(ConditionsFromContext, OnlyActivityStatementsTrigger) {
  auto ctx = update_context(ContextState{}, SensedStatement{"location", "room-1", 3});
  ctx = update_context(ctx, Activity{"in_meeting", 0, 10, {}});
  std::size_t activity_statements = 0;
  for (const auto& [key, st] : ctx.statements) activity_statements += key == kActivityKey ? 1 : 0;
  EXPECT_EQ(ctx.statements.size(), 2u);
  EXPECT_EQ(conditions_from_context(ctx).size(), activity_statements);
}

TEST(ValidateRule, WindowAndPatternBounds) {
  EXPECT_FALSE(validate_rule(EventRule{"acc", 0, Aggregate::Mean, 0, {}, "t"}).empty());
  EXPECT_TRUE(validate_rule(EventRule{"acc", 1, Aggregate::Mean, 0, {}, "t"}).empty());
  EXPECT_FALSE(validate_rule(ActivityRule{{}, 10, "t"}).empty());
  EXPECT_TRUE(validate_rule(jogging_rule()).empty());
}
