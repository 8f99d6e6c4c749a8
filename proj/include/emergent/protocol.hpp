#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emergent/context.hpp"
#include "emergent/core_model.hpp"
#include "emergent/netsim.hpp"

namespace emergent {

// ---------------------------------------------------------------------------
// Scripted per-thing policy. Declarative: how a thing answers offers, what it
// bids per auction subject, and what its provided services return.

enum class OfferReply { Accept, Decline, Ignore };

struct ThingScript {
  OfferReply on_offer = OfferReply::Accept;
  SimTime reply_delay_ms = 0;
  SimTime bid_delay_ms = 0;
  // Subject (role name or service id) to bid value; "*" is the fallback.
  std::map<std::string, double> bids;
  // Output returned when one of this thing's provided services runs.
  std::map<ServiceTypeId, std::string> service_outputs;
  // Whether content pulled from another device is broadcast (caller side).
  bool broadcast_content = true;
  // Activity tag recognized for the owning user -> role to request.
  std::map<std::string, std::string> on_activity;

  std::optional<double> bid_for(const std::string& subject) const;

  friend bool operator==(const ThingScript&, const ThingScript&) = default;
};

std::string to_string(OfferReply r);
std::optional<OfferReply> offer_reply_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Contract Net auction.

enum class AuctionState { Open, Closed, Awarded, Failed };

std::string to_string(AuctionState s);

struct AuctionOutcome {
  std::uint64_t auction_id = 0;
  std::string subject;
  AuctionState state = AuctionState::Open;
  std::optional<ThingId> winner;
  double winning_bid = 0.0;
  std::size_t bid_count = 0;
};

// Highest bid wins; ties go to the smaller ThingId. nullopt when empty.
std::optional<ThingId> select_winner(const std::map<ThingId, double>& bids);

class Auction {
 public:
  Auction(std::uint64_t id, ThingId initiator, std::string subject, SimTime deadline_ms);

  // Ignored (returns false) once closed, past the deadline, for non-finite
  // values, or for a repeated bidder.
  bool submit_bid(const ThingId& bidder, double value, SimTime at_ms);
  AuctionOutcome close();

  std::uint64_t id() const { return id_; }
  const ThingId& initiator() const { return initiator_; }
  const std::string& subject() const { return subject_; }
  SimTime deadline_ms() const { return deadline_ms_; }
  AuctionState state() const { return state_; }
  const std::map<ThingId, double>& bids() const { return bids_; }

 private:
  std::uint64_t id_;
  ThingId initiator_;
  std::string subject_;
  SimTime deadline_ms_;
  AuctionState state_ = AuctionState::Open;
  std::map<ThingId, double> bids_;
};

// ---------------------------------------------------------------------------
// Handshake admission.

enum class DenyReason { NotInEnvironment, NotCapable, NoSlot, PreconditionUnmet, Declined, Timeout, Dissolved, UnknownRole };

std::string to_string(DenyReason r);
std::optional<DenyReason> deny_reason_from_string(const std::string& s);

struct RoleDecision {
  bool granted = false;
  std::optional<DenyReason> reason;
  std::optional<RoleInstanceId> instance;
};

// Whether `ctx` satisfies the role's context precondition: any
// ActivityRecognized condition in χ must match a current trigger. Roles
// without such conditions have no precondition.
bool precondition_holds(const Role& role, const ContextState* ctx);

// Admission checks in order: environment, capability, slot, precondition.
// `world_size` bounds unbounded optional roles.
RoleDecision decide_role_request(const Configuration& config, const std::string& role, const Thing& thing,
                                 std::size_t world_size, const ContextState* ctx);

struct RoleRequestOutcome {
  RoleDecision decision;
  Configuration config;
};

// Pure grant path: Δ and T extended on success. Throws PreconditionError when
// the configuration is Dissolved.
RoleRequestOutcome request_role(const Configuration& config, const std::string& role, const Thing& thing,
                                std::size_t world_size, const ContextState* ctx);

enum class InvocationStatus { Ok, NotExposed, NotProvided, ProviderGone };

std::string to_string(InvocationStatus s);

// Throws PreconditionError when the caller instance is not mapped.
InvocationStatus check_invocation(const Configuration& config, const RoleInstanceId& caller,
                                  const RoleInstanceId& provider, const ServiceTypeId& service);

// ---------------------------------------------------------------------------
// Message-level driver. Re-entrant state machines keyed by auction, handshake
// and call id; every step runs inside the simulator loop.

struct OfferOutcome {
  bool accepted = false;
  std::optional<DenyReason> reason;
  std::optional<RoleInstanceId> instance;
};

class ProtocolEngine {
 public:
  using AuctionDone = std::function<void(const AuctionOutcome&)>;
  using RequestHandler =
      std::function<RoleDecision(const RoleRequestPayload&, const ThingId& from, bool via_offer)>;
  using RoleReply = std::function<void(const RoleDecision&)>;
  using OfferDone = std::function<void(const OfferOutcome&)>;
  using ServiceDone = std::function<void(const ServiceResultPayload&)>;
  // Runs at the provider when a call arrives; returns the status to report.
  using ProviderCheck = std::function<InvocationStatus(const ServiceCallPayload&, const ThingId& provider)>;
  using LeaveHandler = std::function<void(const LeavePayload&, const ThingId& from)>;

  explicit ProtocolEngine(Simulator& sim);

  void set_script(const ThingId& thing, ThingScript script);
  const ThingScript& script(const ThingId& thing) const;

  void set_request_handler(RequestHandler h) { request_handler_ = std::move(h); }
  void set_provider_check(ProviderCheck h) { provider_check_ = std::move(h); }
  void set_leave_handler(LeaveHandler h) { leave_handler_ = std::move(h); }

  // Entry point for every delivered message.
  void on_deliver(const Message& msg, const ThingId& recipient);

  // Sends Cfp to each candidate and closes at deadline_ms. Throws
  // PreconditionError unless deadline_ms > now.
  std::uint64_t start_auction(const ThingId& initiator, std::string subject, std::vector<ThingId> candidates,
                              SimTime deadline_ms, AuctionDone done);
  const Auction& auction(std::uint64_t id) const { return auctions_.at(id).auction; }

  std::uint64_t request_role(const ThingId& thing, const ThingId& coordinator, std::string config_id,
                             std::string role, RoleReply reply);
  std::uint64_t offer_role(const ThingId& coordinator, const ThingId& target, std::string config_id,
                           std::string role, SimTime timeout_ms, OfferDone done);
  std::uint64_t invoke_service(const ThingId& caller, const ThingId& provider, std::string config_id,
                               ServiceTypeId service, const RoleInstanceId& caller_instance,
                               const RoleInstanceId& provider_instance, std::string args, ServiceDone done);
  void send_leave(const ThingId& thing, const ThingId& coordinator, std::string config_id);

 private:
  struct RunningAuction {
    Auction auction;
    std::vector<ThingId> candidates;
    AuctionDone done;
  };
  struct PendingOffer {
    ThingId coordinator;
    ThingId target;
    std::uint64_t timer = 0;
    OfferDone done;
  };

  void send_after(SimTime delay, Message msg);
  void close_auction(std::uint64_t id);
  void handle_request(const Message& msg, const RoleRequestPayload& req, const ThingId& recipient);

  Simulator& sim_;
  std::map<ThingId, ThingScript> scripts_;
  std::map<std::uint64_t, RunningAuction> auctions_;
  std::map<std::uint64_t, PendingOffer> offers_;
  std::map<std::uint64_t, RoleReply> requests_;
  std::map<std::uint64_t, ServiceDone> calls_;
  RequestHandler request_handler_;
  ProviderCheck provider_check_;
  LeaveHandler leave_handler_;
  std::uint64_t next_id_ = 1;
};

// Starts an auction and steps the simulator until it resolves. For top-level
// use only; never call from inside a simulator handler.
AuctionOutcome run_auction(Simulator& sim, ProtocolEngine& engine, const ThingId& initiator,
                           const std::string& subject, std::vector<ThingId> candidates, SimTime deadline_ms);

}  // namespace emergent
