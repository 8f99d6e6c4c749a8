#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <variant>

namespace emergent {

using SimTime = std::int64_t;  // milliseconds since run start

struct ThingId {
  std::string value;

  ThingId() = default;
  ThingId(std::string v) : value(std::move(v)) {}
  ThingId(const char* v) : value(v) {}

  bool empty() const { return value.empty(); }
  friend auto operator<=>(const ThingId&, const ThingId&) = default;
  friend std::ostream& operator<<(std::ostream& os, const ThingId& id) { return os << id.value; }
};

enum class MessageKind {
  Cfp,
  Bid,
  Award,
  Reject,
  RoleOffer,
  RoleRequest,
  RoleGrant,
  RoleDeny,
  Leave,
  ServiceCall,
  ServiceResult,
};

struct CfpPayload {
  std::uint64_t auction_id = 0;
  std::string subject;
  SimTime deadline_ms = 0;
};
struct BidPayload {
  std::uint64_t auction_id = 0;
  double value = 0.0;
};
struct AwardPayload {
  std::uint64_t auction_id = 0;
  std::string subject;
  double value = 0.0;
};
struct RejectPayload {
  std::uint64_t auction_id = 0;
  std::string subject;
};
struct RoleOfferPayload {
  std::uint64_t handshake_id = 0;
  std::string config_id;
  std::string role;
};
// Sent spontaneously by a thing, or as the acceptance of an offer
// (same handshake id).
struct RoleRequestPayload {
  std::uint64_t handshake_id = 0;
  std::string config_id;
  std::string role;
};
struct RoleGrantPayload {
  std::uint64_t handshake_id = 0;
  std::string config_id;
  std::string role;
  std::string instance;
};
struct RoleDenyPayload {
  std::uint64_t handshake_id = 0;
  std::string config_id;
  std::string role;
  std::string reason;
};
struct LeavePayload {
  std::string config_id;
};
struct ServiceCallPayload {
  std::uint64_t call_id = 0;
  std::string config_id;
  std::string service;
  std::string caller_instance;
  std::string provider_instance;
  std::string args;
};
struct ServiceResultPayload {
  std::uint64_t call_id = 0;
  std::string service;
  std::string status;  // Ok | NotExposed | NotProvided | ProviderGone
  std::string output;
};

using Payload = std::variant<CfpPayload, BidPayload, AwardPayload, RejectPayload, RoleOfferPayload,
                             RoleRequestPayload, RoleGrantPayload, RoleDenyPayload, LeavePayload,
                             ServiceCallPayload, ServiceResultPayload>;

struct Message {
  std::uint64_t msg_id = 0;
  ThingId from;
  std::optional<ThingId> to;  // nullopt: broadcast
  Payload payload;
  SimTime sent_at = 0;

  MessageKind kind() const { return static_cast<MessageKind>(payload.index()); }
  bool broadcast() const { return !to.has_value(); }
};

std::string to_string(MessageKind kind);

}  // namespace emergent
