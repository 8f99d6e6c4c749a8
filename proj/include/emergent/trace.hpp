#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "emergent/message.hpp"

namespace emergent {

enum class TraceKind {
  RunStarted,
  MsgSent,
  MsgDelivered,
  MsgDropped,
  EventEmitted,
  ActivityRecognized,
  ConfigFormed,
  RoleGranted,
  RoleDenied,
  ThingJoined,
  ThingLeft,
  ServiceInvoked,
  ConfigStateChanged,
};

std::string to_string(TraceKind kind);
std::optional<TraceKind> trace_kind_from_string(const std::string& s);

// Field names each kind must carry, in serialization order.
const std::vector<std::string>& required_fields(TraceKind kind);

struct TraceRecord {
  SimTime at_ms = 0;
  TraceKind kind = TraceKind::RunStarted;
  nlohmann::ordered_json fields = nlohmann::ordered_json::object();

  // Flat field lookup helpers; empty/0 when absent.
  std::string str(const std::string& key) const;
  std::int64_t num(const std::string& key) const;
  bool flag(const std::string& key) const;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

using Trace = std::vector<TraceRecord>;

// One JSON object per line: {"at_ms":N,"kind":"...",<fields>}.
std::string to_json_line(const TraceRecord& record);
std::string serialize_trace(const Trace& trace);
void write_trace(std::ostream& os, const Trace& trace);

// Throws ParseError on malformed lines and ValidationError on schema
// violations.
TraceRecord parse_trace_line(const std::string& line, std::size_t line_no = 1);
Trace read_trace(std::istream& is);

// Empty when the record matches the published schema.
std::vector<std::string> check_record_schema(const TraceRecord& record);

struct ConfigSummary {
  std::string config;
  std::optional<SimTime> formed_at_ms;
  std::string classification;
  std::size_t roles_granted = 0;
  std::size_t roles_denied = 0;
  std::size_t things_joined = 0;
  std::size_t things_left = 0;
  std::size_t service_invocations = 0;
  std::size_t service_failures = 0;
  std::string final_state;

  friend bool operator==(const ConfigSummary&, const ConfigSummary&) = default;
};

// Fold over trace records, one entry per configuration id in order of first
// appearance.
std::vector<ConfigSummary> summarize(const Trace& trace);
void print_summary(std::ostream& os, const std::vector<ConfigSummary>& summary);

}  // namespace emergent
