#include "emergent/trace.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "emergent/errors.hpp"

namespace emergent {

namespace {

constexpr TraceKind kAllKinds[] = {
    TraceKind::RunStarted,   TraceKind::MsgSent,        TraceKind::MsgDelivered,
    TraceKind::MsgDropped,   TraceKind::EventEmitted,   TraceKind::ActivityRecognized,
    TraceKind::ConfigFormed, TraceKind::RoleGranted,    TraceKind::RoleDenied,
    TraceKind::ThingJoined,  TraceKind::ThingLeft,      TraceKind::ServiceInvoked,
    TraceKind::ConfigStateChanged,
};

// Fields holding integers; everything else is a string.
bool integer_field(const std::string& name) {
  return name == "seed" || name == "msg_id" || name == "window_start" || name == "window_end" ||
         name == "start" || name == "end";
}

}  // namespace

std::string to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::RunStarted: return "RunStarted";
    case TraceKind::MsgSent: return "MsgSent";
    case TraceKind::MsgDelivered: return "MsgDelivered";
    case TraceKind::MsgDropped: return "MsgDropped";
    case TraceKind::EventEmitted: return "EventEmitted";
    case TraceKind::ActivityRecognized: return "ActivityRecognized";
    case TraceKind::ConfigFormed: return "ConfigFormed";
    case TraceKind::RoleGranted: return "RoleGranted";
    case TraceKind::RoleDenied: return "RoleDenied";
    case TraceKind::ThingJoined: return "ThingJoined";
    case TraceKind::ThingLeft: return "ThingLeft";
    case TraceKind::ServiceInvoked: return "ServiceInvoked";
    case TraceKind::ConfigStateChanged: return "ConfigStateChanged";
  }
  return "?";
}

std::optional<TraceKind> trace_kind_from_string(const std::string& s) {
  for (auto k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

const std::vector<std::string>& required_fields(TraceKind kind) {
  static const std::map<TraceKind, std::vector<std::string>> table = {
      {TraceKind::RunStarted, {"scenario", "seed"}},
      {TraceKind::MsgSent, {"msg_id", "msg", "from", "to"}},
      {TraceKind::MsgDelivered, {"msg_id", "msg", "from", "to"}},
      {TraceKind::MsgDropped, {"msg_id", "msg", "from", "to"}},
      {TraceKind::EventEmitted, {"user", "source", "tag", "window_start", "window_end"}},
      {TraceKind::ActivityRecognized, {"user", "tag", "provenance", "start", "end"}},
      {TraceKind::ConfigFormed, {"config", "purpose", "template", "classification", "coordinator"}},
      {TraceKind::RoleGranted, {"config", "role", "instance", "thing", "via"}},
      {TraceKind::RoleDenied, {"config", "role", "thing", "reason", "via"}},
      {TraceKind::ThingJoined, {"config", "thing"}},
      {TraceKind::ThingLeft, {"config", "thing", "reason"}},
      {TraceKind::ServiceInvoked,
       {"config", "service", "caller", "provider", "status", "output", "decision"}},
      {TraceKind::ConfigStateChanged, {"config", "from", "to", "reason"}},
  };
  return table.at(kind);
}

std::string TraceRecord::str(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end() || !it->is_string()) return {};
  return it->get<std::string>();
}

std::int64_t TraceRecord::num(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end() || !it->is_number_integer()) return 0;
  return it->get<std::int64_t>();
}

bool TraceRecord::flag(const std::string& key) const {
  auto it = fields.find(key);
  return it != fields.end() && it->is_boolean() && it->get<bool>();
}

std::string to_json_line(const TraceRecord& record) {
  nlohmann::ordered_json j;
  j["at_ms"] = record.at_ms;
  j["kind"] = to_string(record.kind);
  for (const auto& [k, v] : record.fields.items()) j[k] = v;
  return j.dump();
}

std::string serialize_trace(const Trace& trace) {
  std::string out;
  for (const auto& r : trace) {
    out += to_json_line(r);
    out += '\n';
  }
  return out;
}

void write_trace(std::ostream& os, const Trace& trace) { os << serialize_trace(trace); }

std::vector<std::string> check_record_schema(const TraceRecord& record) {
  std::vector<std::string> problems;
  const auto& req = required_fields(record.kind);
  for (const auto& name : req) {
    auto it = record.fields.find(name);
    if (it == record.fields.end()) {
      problems.push_back(to_string(record.kind) + ": missing field '" + name + "'");
      continue;
    }
    const bool ok = integer_field(name) ? it->is_number_integer() : it->is_string();
    if (!ok) problems.push_back(to_string(record.kind) + ": field '" + name + "' has wrong type");
  }
  for (const auto& [k, _] : record.fields.items()) {
    if (std::find(req.begin(), req.end(), k) == req.end()) {
      problems.push_back(to_string(record.kind) + ": unexpected field '" + k + "'");
    }
  }
  if (record.at_ms < 0) problems.push_back("negative at_ms");
  return problems;
}

TraceRecord parse_trace_line(const std::string& line, std::size_t line_no) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_no, e.byte, e.what());
  }
  if (!j.is_object() || !j.contains("at_ms") || !j.contains("kind") || !j["at_ms"].is_number_integer() ||
      !j["kind"].is_string()) {
    throw ParseError(line_no, 1, "trace record needs integer at_ms and string kind");
  }
  auto kind = trace_kind_from_string(j["kind"].get<std::string>());
  if (!kind) throw ValidationError({"line " + std::to_string(line_no) + ": unknown kind '" +
                                    j["kind"].get<std::string>() + "'"});
  TraceRecord rec;
  rec.at_ms = j["at_ms"].get<SimTime>();
  rec.kind = *kind;
  for (const auto& [k, v] : j.items()) {
    if (k != "at_ms" && k != "kind") rec.fields[k] = v;
  }
  if (auto problems = check_record_schema(rec); !problems.empty()) {
    for (auto& p : problems) p = "line " + std::to_string(line_no) + ": " + p;
    throw ValidationError(std::move(problems));
  }
  return rec;
}

Trace read_trace(std::istream& is) {
  Trace trace;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    trace.push_back(parse_trace_line(line, n));
  }
  return trace;
}

std::vector<ConfigSummary> summarize(const Trace& trace) {
  std::vector<ConfigSummary> out;
  auto entry = [&](const std::string& id) -> ConfigSummary& {
    for (auto& s : out) {
      if (s.config == id) return s;
    }
    out.push_back(ConfigSummary{});
    out.back().config = id;
    return out.back();
  };
  for (const auto& r : trace) {
    const std::string id = r.str("config");
    if (id.empty()) continue;
    auto& s = entry(id);
    switch (r.kind) {
      case TraceKind::ConfigFormed:
        s.formed_at_ms = r.at_ms;
        s.classification = r.str("classification");
        s.final_state = "Operational";
        break;
      case TraceKind::RoleGranted: ++s.roles_granted; break;
      case TraceKind::RoleDenied: ++s.roles_denied; break;
      case TraceKind::ThingJoined: ++s.things_joined; break;
      case TraceKind::ThingLeft: ++s.things_left; break;
      case TraceKind::ServiceInvoked:
        ++s.service_invocations;
        if (r.str("status") != "Ok") ++s.service_failures;
        break;
      case TraceKind::ConfigStateChanged: s.final_state = r.str("to"); break;
      default: break;
    }
  }
  return out;
}

void print_summary(std::ostream& os, const std::vector<ConfigSummary>& summary) {
  const char* headers[] = {"config", "formed_at_ms", "classification", "granted", "denied",
                           "joined", "left",         "invocations",    "failed",  "final_state"};
  std::vector<std::vector<std::string>> rows;
  rows.emplace_back(std::begin(headers), std::end(headers));
  for (const auto& s : summary) {
    rows.push_back({s.config, s.formed_at_ms ? std::to_string(*s.formed_at_ms) : "-",
                    s.classification.empty() ? "-" : s.classification, std::to_string(s.roles_granted),
                    std::to_string(s.roles_denied), std::to_string(s.things_joined),
                    std::to_string(s.things_left), std::to_string(s.service_invocations),
                    std::to_string(s.service_failures), s.final_state.empty() ? "-" : s.final_state});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i + 1 == row.size()) {
        os << row[i] << "\n";
      } else {
        os << std::left << std::setw(static_cast<int>(width[i])) << row[i] << "  ";
      }
    }
  }
}

}  // namespace emergent
