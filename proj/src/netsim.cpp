#include "emergent/netsim.hpp"

#include "emergent/errors.hpp"

namespace emergent {

SimTime LinkModel::latency(const ThingId& from, const ThingId& to) const {
  if (auto it = latency_ms.find({from, to}); it != latency_ms.end()) return it->second;
  return default_latency_ms;
}

Simulator::Simulator(std::vector<Thing> world, LinkModel links, std::uint64_t seed)
    : links_(std::move(links)), seed_(seed), rng_(seed) {
  for (auto& t : world) {
    ThingId id = t.id;
    things_.emplace(std::move(id), std::move(t));
  }
}

std::uint64_t Simulator::schedule(SimTime at_ms, SimEventKind kind) {
  if (at_ms < clock_) {
    throw PastEventError("event at " + std::to_string(at_ms) + " ms is before clock " + std::to_string(clock_));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(SimEvent{at_ms, seq, std::move(kind)});
  return seq;
}

std::uint64_t Simulator::send(Message msg, const Environment* scope) {
  if (!things_.contains(msg.from)) throw UnknownRecipientError("unknown sender " + msg.from.value);
  std::vector<ThingId> recipients;
  if (msg.to) {
    if (!things_.contains(*msg.to)) throw UnknownRecipientError("unknown recipient " + msg.to->value);
    recipients.push_back(*msg.to);
  } else {
    for (const auto& [id, t] : things_) {
      if (id == msg.from) continue;
      if (scope == nullptr || scope->satisfied_by(t)) recipients.push_back(id);
    }
  }
  msg.msg_id = next_msg_id_++;
  msg.sent_at = clock_;
  sent_log_.push_back(msg);
  const std::string kind = to_string(msg.kind());
  record(TraceKind::MsgSent,
         {{"msg_id", msg.msg_id}, {"msg", kind}, {"from", msg.from.value}, {"to", msg.to ? msg.to->value : "*"}});

  for (const auto& to : recipients) {
    const double p = links_.drop_probability;
    bool dropped = p >= 1.0;
    if (p > 0.0 && p < 1.0) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      dropped = u < p;
    }
    if (dropped) {
      record(TraceKind::MsgDropped, {{"msg_id", msg.msg_id}, {"msg", kind}, {"from", msg.from.value}, {"to", to.value}});
      continue;
    }
    schedule(clock_ + links_.latency(msg.from, to), Deliver{msg, to});
  }
  return msg.msg_id;
}

std::uint64_t Simulator::set_timer(SimTime at_ms, std::string owner, std::function<void()> fn) {
  const std::uint64_t id = next_timer_++;
  timers_.emplace(id, std::move(fn));
  schedule(at_ms, TimerFire{std::move(owner), id});
  return id;
}

void Simulator::cancel_timer(std::uint64_t timer_id) { timers_.erase(timer_id); }

std::optional<SimTime> Simulator::next_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().at_ms;
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  SimEvent ev = queue_.top();
  queue_.pop();
  clock_ = ev.at_ms;
  execute(ev);
  if (handlers_.after_step) handlers_.after_step(ev);
  return true;
}

void Simulator::run(SimTime max_time_ms) {
  while (!queue_.empty() && queue_.top().at_ms <= max_time_ms) step();
}

const Thing& Simulator::thing(const ThingId& id) const {
  auto it = things_.find(id);
  if (it == things_.end()) throw UnknownRecipientError("unknown thing " + id.value);
  return it->second;
}

std::vector<Thing> Simulator::world_snapshot() const {
  std::vector<Thing> out;
  out.reserve(things_.size());
  for (const auto& [_, t] : things_) {
    Thing copy = t;
    copy.mailbox.clear();
    out.push_back(std::move(copy));
  }
  return out;
}

void Simulator::record(TraceKind kind, nlohmann::ordered_json fields) {
  trace_.push_back(TraceRecord{clock_, kind, std::move(fields)});
}

void Simulator::execute(const SimEvent& ev) {
  struct Visitor {
    Simulator& sim;
    void operator()(const Deliver& d) const {
      auto& box = sim.things_.at(d.recipient).mailbox;
      box.push_back(d.msg);
      sim.record(TraceKind::MsgDelivered, {{"msg_id", d.msg.msg_id},
                                           {"msg", to_string(d.msg.kind())},
                                           {"from", d.msg.from.value},
                                           {"to", d.recipient.value}});
      if (sim.handlers_.on_deliver) sim.handlers_.on_deliver(d.msg, d.recipient);
    }
    void operator()(const SignalEmit& s) const {
      if (sim.handlers_.on_signal) sim.handlers_.on_signal(s.signal);
    }
    void operator()(const ThingMove& m) const {
      auto it = sim.things_.find(m.thing);
      if (it == sim.things_.end()) throw UnknownRecipientError("unknown thing " + m.thing.value);
      const Point from = it->second.location;
      it->second.location = m.to;
      if (sim.handlers_.on_move) sim.handlers_.on_move(m.thing, from, m.to);
    }
    void operator()(const ScriptAction& a) const {
      if (sim.handlers_.on_script) sim.handlers_.on_script(a);
    }
    void operator()(const TimerFire& t) const {
      auto it = sim.timers_.find(t.timer_id);
      if (it == sim.timers_.end()) return;  // cancelled
      auto fn = std::move(it->second);
      sim.timers_.erase(it);
      fn();
    }
  };
  std::visit(Visitor{*this}, ev.kind);
}

}  // namespace emergent
