#include "emergent/context.hpp"

#include <algorithm>
#include <limits>

#include "emergent/errors.hpp"

namespace emergent {

std::vector<std::string> validate_rule(const EventRule& rule) {
  std::vector<std::string> out;
  if (rule.window_ms <= 0) out.push_back("window_ms must be > 0");
  if (rule.tag.empty()) out.push_back("event rule tag is empty");
  if (rule.sensor.empty()) out.push_back("event rule sensor is empty");
  if (rule.aggregate == Aggregate::InsideRegion && rule.region.size() < 3) {
    out.push_back("inside_region needs a polygon of at least 3 points");
  }
  return out;
}

std::vector<std::string> validate_rule(const ActivityRule& rule) {
  std::vector<std::string> out;
  if (rule.patterns.empty()) out.push_back("activity rule pattern list is empty");
  if (rule.gap_ms < 0) out.push_back("gap_ms must be >= 0");
  if (rule.tag.empty()) out.push_back("activity rule tag is empty");
  return out;
}

bool point_in_polygon(const Point& p, std::span<const Point> polygon) {
  // Even-odd ray casting.
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[i];
    const Point& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

bool evaluate(const EventRule& rule, std::span<const Signal> window) {
  if (window.empty()) return false;
  switch (rule.aggregate) {
    case Aggregate::Mean: {
      double sum = 0.0;
      for (const auto& s : window) {
        const auto* v = std::get_if<double>(&s.value);
        if (v == nullptr) return false;
        sum += *v;
      }
      return sum / static_cast<double>(window.size()) > rule.threshold;
    }
    case Aggregate::Max: {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& s : window) {
        const auto* v = std::get_if<double>(&s.value);
        if (v == nullptr) return false;
        best = std::max(best, *v);
      }
      return best > rule.threshold;
    }
    case Aggregate::Delta: {
      const auto& first = window.front().value;
      const auto& last = window.back().value;
      if (const auto* a = std::get_if<double>(&first)) {
        const auto* b = std::get_if<double>(&last);
        return b != nullptr && *b - *a > rule.threshold;
      }
      const auto* b = std::get_if<Point>(&last);
      return b != nullptr && distance(std::get<Point>(first), *b) > rule.threshold;
    }
    case Aggregate::InsideRegion: {
      std::size_t inside = 0;
      for (const auto& s : window) {
        const auto* p = std::get_if<Point>(&s.value);
        if (p == nullptr) return false;
        if (point_in_polygon(*p, rule.region)) ++inside;
      }
      const double threshold = rule.threshold > 0.0 ? rule.threshold : 1.0;
      return static_cast<double>(inside) / static_cast<double>(window.size()) >= threshold;
    }
  }
  return false;
}

struct IndexedEvent {
  std::size_t rule;
  Event event;
};

}  // namespace

SignalAggregator::SignalAggregator(std::vector<EventRule> rules) : rules_(std::move(rules)) {}

namespace {

// Shared by push() and the batch form so both agree on rule order.
std::vector<IndexedEvent> push_indexed(const std::vector<EventRule>& rules, std::vector<Signal>& signals,
                                       SimTime first, std::map<std::pair<std::size_t, ThingId>, bool>& active,
                                       const Signal& signal) {
  std::vector<IndexedEvent> out;
  const SimTime now = signal.timestamp;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& rule = rules[i];
    if (rule.sensor != signal.sensor) continue;
    const SimTime start = now - rule.window_ms;
    if (start < first) continue;  // incomplete window
    auto lo = std::lower_bound(signals.begin(), signals.end(), start,
                               [](const Signal& s, SimTime t) { return s.timestamp < t; });
    std::span<const Signal> window(lo, signals.end());
    const bool on = evaluate(rule, window);
    bool& was = active[{i, signal.source}];
    if (on && !was) {
      Event ev{rule.tag, now, start, now, signal.source, {}};
      for (const auto& s : window) ev.evidence.push_back({s.source, s.sensor, s.timestamp});
      out.push_back({i, std::move(ev)});
    }
    was = on;
  }
  return out;
}

}  // namespace

std::vector<Event> SignalAggregator::push(const Signal& signal) {
  auto [it, fresh] = streams_.try_emplace({signal.source, signal.sensor});
  Stream& stream = it->second;
  if (fresh) {
    if (signal.timestamp < 0) throw MalformedStreamError("negative signal timestamp");
    stream.first = signal.timestamp;
  } else if (signal.timestamp <= stream.signals.back().timestamp) {
    throw MalformedStreamError("non-increasing timestamp in stream " + signal.source.value + "/" +
                               signal.sensor + " at " + std::to_string(signal.timestamp));
  }
  stream.signals.push_back(signal);

  SimTime horizon = 0;
  for (const auto& r : rules_) {
    if (r.sensor == signal.sensor) horizon = std::max(horizon, r.window_ms);
  }
  const SimTime keep_from = signal.timestamp - horizon;
  auto& sig = stream.signals;
  sig.erase(sig.begin(), std::lower_bound(sig.begin(), sig.end(), keep_from, [](const Signal& s, SimTime t) {
              return s.timestamp < t;
            }));

  std::vector<Event> out;
  for (auto& ie : push_indexed(rules_, sig, stream.first, active_, signal)) out.push_back(std::move(ie.event));
  return out;
}

std::vector<Event> aggregate_signals(std::span<const Signal> stream, std::span<const EventRule> rules) {
  const std::vector<EventRule> rule_list(rules.begin(), rules.end());
  std::map<std::pair<ThingId, std::string>, std::vector<Signal>> streams;
  std::map<std::pair<std::size_t, ThingId>, bool> active;
  std::vector<IndexedEvent> all;
  for (const auto& s : stream) {
    auto& buf = streams[{s.source, s.sensor}];
    if (!buf.empty() && s.timestamp <= buf.back().timestamp) {
      throw MalformedStreamError("non-increasing timestamp in stream " + s.source.value + "/" + s.sensor +
                                 " at " + std::to_string(s.timestamp));
    }
    if (s.timestamp < 0) throw MalformedStreamError("negative signal timestamp");
    const SimTime first = buf.empty() ? s.timestamp : buf.front().timestamp;
    buf.push_back(s);
    for (auto& ie : push_indexed(rule_list, buf, first, active, s)) all.push_back(std::move(ie));
  }
  std::stable_sort(all.begin(), all.end(), [](const IndexedEvent& a, const IndexedEvent& b) {
    return std::tie(a.event.timestamp, a.rule, a.event.source) <
           std::tie(b.event.timestamp, b.rule, b.event.source);
  });
  std::vector<Event> out;
  out.reserve(all.size());
  for (auto& ie : all) out.push_back(std::move(ie.event));
  return out;
}

namespace {

bool tag_matches(const std::string& pattern, const std::string& tag) {
  return pattern == kWildcard || pattern == tag;
}

// Lexicographically smallest index sequence matching `rule` that starts at
// `start`, respecting the inter-event gap.
class SubsequenceMatcher {
 public:
  SubsequenceMatcher(std::span<const Event> events, const ActivityRule& rule)
      : events_(events), rule_(rule), dead_(rule.patterns.size() * events.size(), false) {}

  std::optional<std::vector<std::size_t>> match_from(std::size_t start) {
    if (!tag_matches(rule_.patterns[0], events_[start].tag)) return std::nullopt;
    std::vector<std::size_t> path{start};
    if (extend(0, start, path)) return path;
    return std::nullopt;
  }

 private:
  bool extend(std::size_t k, std::size_t i, std::vector<std::size_t>& path) {
    if (k + 1 == rule_.patterns.size()) return true;
    const std::size_t slot = k * events_.size() + i;
    if (dead_[slot]) return false;
    for (std::size_t j = i + 1; j < events_.size(); ++j) {
      if (events_[j].timestamp - events_[i].timestamp > rule_.gap_ms) break;
      if (!tag_matches(rule_.patterns[k + 1], events_[j].tag)) continue;
      path.push_back(j);
      if (extend(k + 1, j, path)) return true;
      path.pop_back();
    }
    dead_[slot] = true;
    return false;
  }

  std::span<const Event> events_;
  const ActivityRule& rule_;
  std::vector<bool> dead_;
};

struct Candidate {
  std::size_t rule;
  std::vector<std::size_t> indices;
  SimTime start;
  SimTime end;
};

}  // namespace

std::vector<Activity> infer_activity(std::span<const Event> events, std::span<const ActivityRule> rules) {
  std::vector<Candidate> candidates;
  for (std::size_t r = 0; r < rules.size(); ++r) {
    if (rules[r].patterns.empty()) continue;
    SubsequenceMatcher matcher(events, rules[r]);
    std::size_t pos = 0;
    while (pos < events.size()) {
      std::optional<std::vector<std::size_t>> found;
      for (std::size_t i = pos; i < events.size() && !found; ++i) found = matcher.match_from(i);
      if (!found) break;
      pos = found->back() + 1;
      candidates.push_back({r, *found, events[found->front()].timestamp, events[found->back()].timestamp});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.start, a.rule, a.end) < std::tie(b.start, b.rule, b.end);
  });

  std::vector<Activity> out;
  for (const auto& c : candidates) {
    const bool overlaps = std::any_of(out.begin(), out.end(), [&](const Activity& a) {
      return c.start <= a.end && a.start <= c.end;
    });
    if (overlaps) continue;
    Activity act{rules[c.rule].tag, c.start, c.end, {}};
    for (auto i : c.indices) act.events.push_back(events[i].tag);
    out.push_back(std::move(act));
  }
  return out;
}

namespace {

int rank(Provenance p) { return p == Provenance::Sensed ? 1 : 0; }

}  // namespace

ContextState update_context(const ContextState& ctx, const ContextItem& item) {
  std::string key;
  Statement incoming;
  if (const auto* act = std::get_if<Activity>(&item)) {
    key = kActivityKey;
    incoming = {act->tag, act->end, Provenance::Inferred};
  } else {
    const auto& s = std::get<SensedStatement>(item);
    key = s.key;
    incoming = {s.value, s.timestamp, Provenance::Sensed};
  }

  ContextState next = ctx;
  auto it = next.statements.find(key);
  if (it == next.statements.end()) {
    next.statements.emplace(key, incoming);
    return next;
  }
  const Statement& current = it->second;
  const bool newer = incoming.timestamp > current.timestamp;
  const bool tie_wins =
      incoming.timestamp == current.timestamp && rank(incoming.provenance) >= rank(current.provenance);
  if (newer || tie_wins) it->second = incoming;
  return next;
}

std::set<Condition> conditions_from_context(const ContextState& ctx) {
  std::set<Condition> out;
  for (const auto& [key, st] : ctx.statements) {
    if (key == kActivityKey) out.insert(Condition{ConditionKind::ActivityRecognized, st.value});
  }
  return out;
}

std::string to_string(Aggregate a) {
  switch (a) {
    case Aggregate::Mean: return "mean";
    case Aggregate::Max: return "max";
    case Aggregate::Delta: return "delta";
    case Aggregate::InsideRegion: return "inside_region";
  }
  return "?";
}

std::optional<Aggregate> aggregate_from_string(const std::string& s) {
  for (auto a : {Aggregate::Mean, Aggregate::Max, Aggregate::Delta, Aggregate::InsideRegion}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::string to_string(Provenance p) { return p == Provenance::Sensed ? "Sensed" : "Inferred"; }

}  // namespace emergent
