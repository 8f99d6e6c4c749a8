#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "emergent/core_model.hpp"

namespace emergent {

using SignalValue = std::variant<double, Point>;

struct Signal {
  ThingId source;
  std::string sensor;
  SimTime timestamp = 0;
  SignalValue value;

  friend bool operator==(const Signal&, const Signal&) = default;
};

struct SignalRef {
  ThingId source;
  std::string sensor;
  SimTime timestamp = 0;

  friend auto operator<=>(const SignalRef&, const SignalRef&) = default;
};

struct Event {
  std::string tag;
  SimTime timestamp = 0;
  SimTime window_start = 0;
  SimTime window_end = 0;
  ThingId source;
  std::vector<SignalRef> evidence;

  friend bool operator==(const Event&, const Event&) = default;
};

struct Activity {
  std::string tag;
  SimTime start = 0;
  SimTime end = 0;
  std::vector<std::string> events;

  friend bool operator==(const Activity&, const Activity&) = default;
};

enum class Aggregate { Mean, Max, Delta, InsideRegion };

struct EventRule {
  std::string sensor;
  SimTime window_ms = 1000;
  Aggregate aggregate = Aggregate::Mean;
  double threshold = 0.0;
  std::vector<Point> region;  // polygon, used by InsideRegion
  std::string tag;

  friend bool operator==(const EventRule&, const EventRule&) = default;
};

struct ActivityRule {
  std::vector<std::string> patterns;
  SimTime gap_ms = 0;
  std::string tag;

  friend bool operator==(const ActivityRule&, const ActivityRule&) = default;
};

// Rule well-formedness: window_ms > 0, nonempty pattern list.
std::vector<std::string> validate_rule(const EventRule& rule);
std::vector<std::string> validate_rule(const ActivityRule& rule);

bool point_in_polygon(const Point& p, std::span<const Point> polygon);

// Incremental form of aggregate_signals. Each stream (source, sensor) keeps a
// trailing window [t - window_ms, t] ending at its newest signal; a window is
// complete once it spans back to the stream's first signal. A rule emits on
// the rising edge of its predicate.
class SignalAggregator {
 public:
  explicit SignalAggregator(std::vector<EventRule> rules);

  // Throws MalformedStreamError if the stream's timestamps do not increase.
  std::vector<Event> push(const Signal& signal);
  const std::vector<EventRule>& rules() const { return rules_; }

 private:
  struct Stream {
    SimTime first = 0;
    std::vector<Signal> signals;
  };
  using StreamKey = std::pair<ThingId, std::string>;

  std::vector<EventRule> rules_;
  std::map<StreamKey, Stream> streams_;
  std::map<std::pair<std::size_t, ThingId>, bool> active_;
};

// Events ordered by (timestamp, rule declaration order, source).
std::vector<Event> aggregate_signals(std::span<const Signal> stream, std::span<const EventRule> rules);

std::vector<Activity> infer_activity(std::span<const Event> events, std::span<const ActivityRule> rules);

enum class Provenance { Sensed, Inferred };

struct Statement {
  std::string value;
  SimTime timestamp = 0;
  Provenance provenance = Provenance::Sensed;

  friend bool operator==(const Statement&, const Statement&) = default;
};

struct SensedStatement {
  std::string key;
  std::string value;
  SimTime timestamp = 0;
};

inline constexpr const char* kActivityKey = "activity";

struct ContextState {
  std::string user;
  std::map<std::string, Statement> statements;
  std::map<std::string, std::string> profile;

  friend bool operator==(const ContextState&, const ContextState&) = default;
};

using ContextItem = std::variant<Activity, SensedStatement>;

// Newer timestamp wins; on a tie Sensed beats Inferred.
ContextState update_context(const ContextState& ctx, const ContextItem& item);

// One ActivityRecognized trigger per current activity statement.
std::set<Condition> conditions_from_context(const ContextState& ctx);

std::string to_string(Aggregate a);
std::optional<Aggregate> aggregate_from_string(const std::string& s);
std::string to_string(Provenance p);

}  // namespace emergent
