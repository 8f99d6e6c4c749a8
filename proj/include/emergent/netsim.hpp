#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emergent/context.hpp"
#include "emergent/core_model.hpp"
#include "emergent/message.hpp"
#include "emergent/trace.hpp"

namespace emergent {

struct Deliver {
  Message msg;
  ThingId recipient;
};
struct SignalEmit {
  Signal signal;
};
struct ThingMove {
  ThingId thing;
  Point to;
};
// Opaque handle into the owner's list of scripted actions.
struct ScriptAction {
  std::string actor;
  std::size_t action = 0;
};
struct TimerFire {
  std::string owner;
  std::uint64_t timer_id = 0;
};

using SimEventKind = std::variant<Deliver, SignalEmit, ThingMove, ScriptAction, TimerFire>;

struct SimEvent {
  SimTime at_ms = 0;
  std::uint64_t seq = 0;
  SimEventKind kind;
};

struct LinkModel {
  SimTime default_latency_ms = 10;
  std::map<std::pair<ThingId, ThingId>, SimTime> latency_ms;
  double drop_probability = 0.0;

  SimTime latency(const ThingId& from, const ThingId& to) const;
};

// Optional reactions installed by the layer driving the simulator.
struct SimHandlers {
  std::function<void(const Message&, const ThingId& recipient)> on_deliver;
  std::function<void(const Signal&)> on_signal;
  std::function<void(const ThingId&, const Point& from, const Point& to)> on_move;
  std::function<void(const ScriptAction&)> on_script;
  // Called after every executed event.
  std::function<void(const SimEvent&)> after_step;
};

// Single-threaded discrete-event simulator. Events run in (at_ms, seq) order;
// the seeded RNG is drawn only for message drops when 0 < p < 1, one draw per
// recipient, in execution order.
class Simulator {
 public:
  Simulator(std::vector<Thing> world, LinkModel links, std::uint64_t seed);

  SimTime now() const { return clock_; }
  std::uint64_t seed() const { return seed_; }

  // Throws PastEventError when at_ms < now().
  std::uint64_t schedule(SimTime at_ms, SimEventKind kind);

  // Assigns msg_id and sent_at, then schedules one Deliver per recipient.
  // Broadcast reaches every thing except the sender that satisfies `scope`
  // (all things when null). Throws UnknownRecipientError.
  std::uint64_t send(Message msg, const Environment* scope = nullptr);

  std::uint64_t set_timer(SimTime at_ms, std::string owner, std::function<void()> fn);
  void cancel_timer(std::uint64_t timer_id);

  bool has_pending() const { return !queue_.empty(); }
  std::optional<SimTime> next_time() const;
  // Executes the next event; false when the queue is empty.
  bool step();
  // Steps until the queue is empty or the next event lies past max_time_ms.
  void run(SimTime max_time_ms);

  void set_handlers(SimHandlers handlers) { handlers_ = std::move(handlers); }

  const std::map<ThingId, Thing>& things() const { return things_; }
  const Thing& thing(const ThingId& id) const;
  bool has_thing(const ThingId& id) const { return things_.contains(id); }
  std::vector<Thing> world_snapshot() const;
  const LinkModel& links() const { return links_; }

  void record(TraceKind kind, nlohmann::ordered_json fields);
  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }

  const std::vector<Message>& sent_log() const { return sent_log_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.at_ms != b.at_ms ? a.at_ms > b.at_ms : a.seq > b.seq;
    }
  };

  void execute(const SimEvent& ev);

  std::map<ThingId, Thing> things_;
  LinkModel links_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  SimTime clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t next_timer_ = 1;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::map<std::uint64_t, std::function<void()>> timers_;
  SimHandlers handlers_;
  Trace trace_;
  std::vector<Message> sent_log_;
};

}  // namespace emergent
