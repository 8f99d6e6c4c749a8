#include "emergent/protocol.hpp"

#include <cmath>

#include "emergent/errors.hpp"
#include "emergent/matcher.hpp"

namespace emergent {

std::optional<double> ThingScript::bid_for(const std::string& subject) const {
  if (auto it = bids.find(subject); it != bids.end()) return it->second;
  if (auto it = bids.find(std::string(kWildcard)); it != bids.end()) return it->second;
  return std::nullopt;
}

std::string to_string(OfferReply r) {
  switch (r) {
    case OfferReply::Accept: return "accept";
    case OfferReply::Decline: return "decline";
    case OfferReply::Ignore: return "ignore";
  }
  return "?";
}

std::optional<OfferReply> offer_reply_from_string(const std::string& s) {
  for (auto r : {OfferReply::Accept, OfferReply::Decline, OfferReply::Ignore}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::string to_string(AuctionState s) {
  switch (s) {
    case AuctionState::Open: return "Open";
    case AuctionState::Closed: return "Closed";
    case AuctionState::Awarded: return "Awarded";
    case AuctionState::Failed: return "Failed";
  }
  return "?";
}

std::optional<ThingId> select_winner(const std::map<ThingId, double>& bids) {
  std::optional<ThingId> best;
  double best_value = 0.0;
  // Map iteration is in ThingId order, so strict > keeps the smaller id on ties.
  for (const auto& [id, value] : bids) {
    if (!best || value > best_value) {
      best = id;
      best_value = value;
    }
  }
  return best;
}

Auction::Auction(std::uint64_t id, ThingId initiator, std::string subject, SimTime deadline_ms)
    : id_(id), initiator_(std::move(initiator)), subject_(std::move(subject)), deadline_ms_(deadline_ms) {}

bool Auction::submit_bid(const ThingId& bidder, double value, SimTime at_ms) {
  if (state_ != AuctionState::Open || at_ms > deadline_ms_ || !std::isfinite(value)) return false;
  return bids_.emplace(bidder, value).second;
}

AuctionOutcome Auction::close() {
  AuctionOutcome out{id_, subject_, AuctionState::Closed, std::nullopt, 0.0, bids_.size()};
  if (state_ != AuctionState::Open) {
    out.state = state_;
    if (state_ == AuctionState::Awarded) {
      out.winner = select_winner(bids_);
      out.winning_bid = bids_.at(*out.winner);
    }
    return out;
  }
  state_ = AuctionState::Closed;
  if (auto w = select_winner(bids_)) {
    state_ = AuctionState::Awarded;
    out.winner = *w;
    out.winning_bid = bids_.at(*w);
  } else {
    state_ = AuctionState::Failed;
  }
  out.state = state_;
  return out;
}

std::string to_string(DenyReason r) {
  switch (r) {
    case DenyReason::NotInEnvironment: return "NotInEnvironment";
    case DenyReason::NotCapable: return "NotCapable";
    case DenyReason::NoSlot: return "NoSlot";
    case DenyReason::PreconditionUnmet: return "PreconditionUnmet";
    case DenyReason::Declined: return "Declined";
    case DenyReason::Timeout: return "Timeout";
    case DenyReason::Dissolved: return "Dissolved";
    case DenyReason::UnknownRole: return "UnknownRole";
  }
  return "?";
}

std::optional<DenyReason> deny_reason_from_string(const std::string& s) {
  for (auto r : {DenyReason::NotInEnvironment, DenyReason::NotCapable, DenyReason::NoSlot,
                 DenyReason::PreconditionUnmet, DenyReason::Declined, DenyReason::Timeout, DenyReason::Dissolved,
                 DenyReason::UnknownRole}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

bool precondition_holds(const Role& role, const ContextState* ctx) {
  std::vector<const Condition*> required;
  for (const auto& c : role.conditions) {
    if (c.kind == ConditionKind::ActivityRecognized) required.push_back(&c);
  }
  if (required.empty()) return true;
  if (ctx == nullptr) return false;
  const auto triggers = conditions_from_context(*ctx);
  for (const auto* c : required) {
    for (const auto& t : triggers) {
      if (c->matches(t.kind, t.payload_pattern)) return true;
    }
  }
  return false;
}

RoleDecision decide_role_request(const Configuration& config, const std::string& role_name, const Thing& thing,
                                 std::size_t world_size, const ContextState* ctx) {
  auto deny = [](DenyReason r) { return RoleDecision{false, r, std::nullopt}; };
  const Role* role = config.role(role_name);
  if (role == nullptr) return deny(DenyReason::UnknownRole);
  if (config.state == ConfigState::Dissolved) return deny(DenyReason::Dissolved);
  if (!eligible(config.environment, *role, thing)) return deny(DenyReason::NotInEnvironment);
  if (!feasible(*role, thing)) return deny(DenyReason::NotCapable);

  const auto held = config.instances_held_by(thing.id);
  const bool holds_this = std::any_of(held.begin(), held.end(), [&](const auto& i) { return i.role == role_name; });
  if (holds_this || (!config.policy.allow_multi_role && !held.empty())) return deny(DenyReason::NoSlot);
  auto slot = config.free_instance(role_name, world_size);
  if (!slot) return deny(DenyReason::NoSlot);

  if (!precondition_holds(*role, ctx)) return deny(DenyReason::PreconditionUnmet);
  return RoleDecision{true, std::nullopt, slot};
}

RoleRequestOutcome request_role(const Configuration& config, const std::string& role, const Thing& thing,
                                std::size_t world_size, const ContextState* ctx) {
  if (config.state == ConfigState::Dissolved) throw PreconditionError("request_role on a dissolved configuration");
  RoleRequestOutcome out{decide_role_request(config, role, thing, world_size, ctx), config};
  if (out.decision.granted) {
    out.config.delta[*out.decision.instance] = thing.id;
    out.config.things.insert(thing.id);
  }
  return out;
}

std::string to_string(InvocationStatus s) {
  switch (s) {
    case InvocationStatus::Ok: return "Ok";
    case InvocationStatus::NotExposed: return "NotExposed";
    case InvocationStatus::NotProvided: return "NotProvided";
    case InvocationStatus::ProviderGone: return "ProviderGone";
  }
  return "?";
}

InvocationStatus check_invocation(const Configuration& config, const RoleInstanceId& caller,
                                  const RoleInstanceId& provider, const ServiceTypeId& service) {
  if (!config.delta.contains(caller)) throw PreconditionError("caller instance " + caller.str() + " is not mapped");
  const Role* caller_role = config.role(caller.role);
  const Role* provider_role = config.role(provider.role);
  if (caller_role == nullptr || !caller_role->expected().contains(service)) return InvocationStatus::NotExposed;
  if (provider_role == nullptr || !provider_role->provided().contains(service)) return InvocationStatus::NotProvided;
  if (!config.delta.contains(provider)) return InvocationStatus::ProviderGone;
  return InvocationStatus::Ok;
}

ProtocolEngine::ProtocolEngine(Simulator& sim) : sim_(sim) {}

void ProtocolEngine::set_script(const ThingId& thing, ThingScript script) { scripts_[thing] = std::move(script); }

const ThingScript& ProtocolEngine::script(const ThingId& thing) const {
  static const ThingScript kDefault{};
  auto it = scripts_.find(thing);
  return it == scripts_.end() ? kDefault : it->second;
}

void ProtocolEngine::send_after(SimTime delay, Message msg) {
  if (delay <= 0) {
    sim_.send(std::move(msg));
    return;
  }
  sim_.set_timer(sim_.now() + delay, msg.from.value, [this, msg]() mutable { sim_.send(std::move(msg)); });
}

std::uint64_t ProtocolEngine::start_auction(const ThingId& initiator, std::string subject,
                                            std::vector<ThingId> candidates, SimTime deadline_ms, AuctionDone done) {
  if (deadline_ms <= sim_.now()) throw PreconditionError("auction deadline must lie in the future");
  const std::uint64_t id = next_id_++;
  auctions_.emplace(id, RunningAuction{Auction(id, initiator, subject, deadline_ms), candidates, std::move(done)});
  for (const auto& c : candidates) {
    sim_.send(Message{0, initiator, c, CfpPayload{id, subject, deadline_ms}, 0});
  }
  sim_.set_timer(deadline_ms, initiator.value, [this, id] { close_auction(id); });
  return id;
}

void ProtocolEngine::close_auction(std::uint64_t id) {
  auto& running = auctions_.at(id);
  const AuctionOutcome outcome = running.auction.close();
  if (outcome.state == AuctionState::Awarded) {
    const ThingId& initiator = running.auction.initiator();
    for (const auto& c : running.candidates) {
      if (c == *outcome.winner) {
        sim_.send(Message{0, initiator, c, AwardPayload{id, outcome.subject, outcome.winning_bid}, 0});
      } else {
        sim_.send(Message{0, initiator, c, RejectPayload{id, outcome.subject}, 0});
      }
    }
  }
  if (running.done) running.done(outcome);
}

std::uint64_t ProtocolEngine::request_role(const ThingId& thing, const ThingId& coordinator, std::string config_id,
                                           std::string role, RoleReply reply) {
  const std::uint64_t id = next_id_++;
  requests_[id] = std::move(reply);
  sim_.send(Message{0, thing, coordinator, RoleRequestPayload{id, std::move(config_id), std::move(role)}, 0});
  return id;
}

std::uint64_t ProtocolEngine::offer_role(const ThingId& coordinator, const ThingId& target, std::string config_id,
                                         std::string role, SimTime timeout_ms, OfferDone done) {
  const std::uint64_t id = next_id_++;
  const auto timer = sim_.set_timer(sim_.now() + timeout_ms, coordinator.value, [this, id] {
    auto it = offers_.find(id);
    if (it == offers_.end()) return;
    auto cb = std::move(it->second.done);
    offers_.erase(it);
    if (cb) cb(OfferOutcome{false, DenyReason::Timeout, std::nullopt});
  });
  offers_[id] = PendingOffer{coordinator, target, timer, std::move(done)};
  sim_.send(Message{0, coordinator, target, RoleOfferPayload{id, std::move(config_id), std::move(role)}, 0});
  return id;
}

std::uint64_t ProtocolEngine::invoke_service(const ThingId& caller, const ThingId& provider, std::string config_id,
                                             ServiceTypeId service, const RoleInstanceId& caller_instance,
                                             const RoleInstanceId& provider_instance, std::string args,
                                             ServiceDone done) {
  const std::uint64_t id = next_id_++;
  calls_[id] = std::move(done);
  sim_.send(Message{0, caller, provider,
                    ServiceCallPayload{id, std::move(config_id), std::move(service), caller_instance.str(),
                                       provider_instance.str(), std::move(args)},
                    0});
  return id;
}

void ProtocolEngine::send_leave(const ThingId& thing, const ThingId& coordinator, std::string config_id) {
  sim_.send(Message{0, thing, coordinator, LeavePayload{std::move(config_id)}, 0});
}

void ProtocolEngine::handle_request(const Message& msg, const RoleRequestPayload& req, const ThingId& recipient) {
  auto offer = offers_.find(req.handshake_id);
  const bool via_offer = offer != offers_.end() && offer->second.target == msg.from;
  RoleDecision decision;
  if (!via_offer && !requests_.contains(req.handshake_id)) {
    // Acceptance of an offer that already timed out.
    decision = RoleDecision{false, DenyReason::Timeout, std::nullopt};
  } else {
    decision = request_handler_ ? request_handler_(req, msg.from, via_offer)
                                : RoleDecision{false, DenyReason::UnknownRole, std::nullopt};
  }
  if (decision.granted) {
    sim_.send(Message{0, recipient, msg.from,
                      RoleGrantPayload{req.handshake_id, req.config_id, req.role, decision.instance->str()}, 0});
  } else {
    sim_.send(Message{0, recipient, msg.from,
                      RoleDenyPayload{req.handshake_id, req.config_id, req.role, to_string(*decision.reason)}, 0});
  }
  if (via_offer) {
    sim_.cancel_timer(offer->second.timer);
    auto cb = std::move(offer->second.done);
    offers_.erase(offer);
    if (cb) cb(OfferOutcome{decision.granted, decision.reason, decision.instance});
  }
}

void ProtocolEngine::on_deliver(const Message& msg, const ThingId& recipient) {
  struct Visitor {
    ProtocolEngine& e;
    const Message& msg;
    const ThingId& recipient;

    void operator()(const CfpPayload& p) const {
      if (auto bid = e.script(recipient).bid_for(p.subject)) {
        e.send_after(e.script(recipient).bid_delay_ms, Message{0, recipient, msg.from, BidPayload{p.auction_id, *bid}, 0});
      }
    }
    void operator()(const BidPayload& p) const {
      auto it = e.auctions_.find(p.auction_id);
      if (it != e.auctions_.end()) it->second.auction.submit_bid(msg.from, p.value, e.sim_.now());
    }
    void operator()(const AwardPayload&) const {}
    void operator()(const RejectPayload&) const {}
    void operator()(const RoleOfferPayload& p) const {
      const auto& script = e.script(recipient);
      switch (script.on_offer) {
        case OfferReply::Accept:
          e.send_after(script.reply_delay_ms,
                       Message{0, recipient, msg.from, RoleRequestPayload{p.handshake_id, p.config_id, p.role}, 0});
          break;
        case OfferReply::Decline:
          e.send_after(script.reply_delay_ms,
                       Message{0, recipient, msg.from,
                               RoleDenyPayload{p.handshake_id, p.config_id, p.role, to_string(DenyReason::Declined)},
                               0});
          break;
        case OfferReply::Ignore: break;
      }
    }
    void operator()(const RoleRequestPayload& p) const { e.handle_request(msg, p, recipient); }
    void operator()(const RoleGrantPayload& p) const {
      auto it = e.requests_.find(p.handshake_id);
      if (it == e.requests_.end()) return;
      auto cb = std::move(it->second);
      e.requests_.erase(it);
      if (cb) cb(RoleDecision{true, std::nullopt, std::nullopt});
    }
    void operator()(const RoleDenyPayload& p) const {
      // Either the target declined our offer, or the coordinator denied a request.
      if (auto it = e.offers_.find(p.handshake_id); it != e.offers_.end() && it->second.target == msg.from) {
        e.sim_.cancel_timer(it->second.timer);
        auto cb = std::move(it->second.done);
        e.offers_.erase(it);
        if (cb) cb(OfferOutcome{false, DenyReason::Declined, std::nullopt});
        return;
      }
      auto it = e.requests_.find(p.handshake_id);
      if (it == e.requests_.end()) return;
      auto cb = std::move(it->second);
      e.requests_.erase(it);
      if (cb) cb(RoleDecision{false, deny_reason_from_string(p.reason).value_or(DenyReason::Declined), std::nullopt});
    }
    void operator()(const LeavePayload& p) const {
      if (e.leave_handler_) e.leave_handler_(p, msg.from);
    }
    void operator()(const ServiceCallPayload& p) const {
      const InvocationStatus status =
          e.provider_check_ ? e.provider_check_(p, recipient) : InvocationStatus::Ok;
      std::string output;
      if (status == InvocationStatus::Ok) {
        const auto& outs = e.script(recipient).service_outputs;
        auto it = outs.find(p.service);
        output = it == outs.end() ? "done" : it->second;
      }
      e.sim_.send(Message{0, recipient, msg.from, ServiceResultPayload{p.call_id, p.service, to_string(status), output}, 0});
    }
    void operator()(const ServiceResultPayload& p) const {
      auto it = e.calls_.find(p.call_id);
      if (it == e.calls_.end()) return;
      auto cb = std::move(it->second);
      e.calls_.erase(it);
      if (cb) cb(p);
    }
  };
  std::visit(Visitor{*this, msg, recipient}, msg.payload);
}

AuctionOutcome run_auction(Simulator& sim, ProtocolEngine& engine, const ThingId& initiator,
                           const std::string& subject, std::vector<ThingId> candidates, SimTime deadline_ms) {
  std::optional<AuctionOutcome> result;
  engine.start_auction(initiator, subject, std::move(candidates), deadline_ms,
                       [&](const AuctionOutcome& o) { result = o; });
  while (!result && sim.step()) {
  }
  if (!result) throw Error("auction did not resolve");
  return *result;
}

}  // namespace emergent
