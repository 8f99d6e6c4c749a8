#include "emergent/message.hpp"

namespace emergent {

static_assert(std::variant_size_v<Payload> == static_cast<std::size_t>(MessageKind::ServiceResult) + 1);

std::string to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::Cfp: return "Cfp";
    case MessageKind::Bid: return "Bid";
    case MessageKind::Award: return "Award";
    case MessageKind::Reject: return "Reject";
    case MessageKind::RoleOffer: return "RoleOffer";
    case MessageKind::RoleRequest: return "RoleRequest";
    case MessageKind::RoleGrant: return "RoleGrant";
    case MessageKind::RoleDeny: return "RoleDeny";
    case MessageKind::Leave: return "Leave";
    case MessageKind::ServiceCall: return "ServiceCall";
    case MessageKind::ServiceResult: return "ServiceResult";
  }
  return "?";
}

}  // namespace emergent
