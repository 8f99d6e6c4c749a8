#include "emergent/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "emergent/errors.hpp"

namespace emergent {

using json = nlohmann::ordered_json;

namespace {

// Collects problems with their JSON paths instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> problems;

  void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

  bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      fail(path, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        fail(path + "." + key, "unknown field");
      }
    }
    return true;
  }

  const json* field(const json& obj, const char* key, const std::string& path, bool required) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(path + "." + key, "missing required field");
      return nullptr;
    }
    return &*it;
  }

  std::string str(const json& obj, const char* key, const std::string& path, bool required = true,
                  std::string def = {}) {
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return def;
    if (!j->is_string()) {
      fail(path + "." + key, "expected a string");
      return def;
    }
    return j->get<std::string>();
  }

  double number(const json& obj, const char* key, const std::string& path, bool required, double def) {
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return def;
    if (!j->is_number()) {
      fail(path + "." + key, "expected a number");
      return def;
    }
    return j->get<double>();
  }

  std::int64_t integer(const json& obj, const char* key, const std::string& path, bool required, std::int64_t def) {
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return def;
    if (!j->is_number_integer()) {
      fail(path + "." + key, "expected an integer");
      return def;
    }
    return j->get<std::int64_t>();
  }

  bool boolean(const json& obj, const char* key, const std::string& path, bool def) {
    const json* j = field(obj, key, path, false);
    if (j == nullptr) return def;
    if (!j->is_boolean()) {
      fail(path + "." + key, "expected a boolean");
      return def;
    }
    return j->get<bool>();
  }

  std::vector<std::string> strings(const json& obj, const char* key, const std::string& path, bool required = false) {
    std::vector<std::string> out;
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return out;
    if (!j->is_array()) {
      fail(path + "." + key, "expected an array of strings");
      return out;
    }
    for (std::size_t i = 0; i < j->size(); ++i) {
      if (!(*j)[i].is_string()) {
        fail(path + "." + key + "[" + std::to_string(i) + "]", "expected a string");
        continue;
      }
      out.push_back((*j)[i].get<std::string>());
    }
    return out;
  }

  Point point(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
      fail(path, "expected [x, y]");
      return {};
    }
    return Point{j[0].get<double>(), j[1].get<double>()};
  }

  const json& array(const json& obj, const char* key, const std::string& path, bool required = false) {
    static const json empty = json::array();
    const json* j = field(obj, key, path, required);
    if (j == nullptr) return empty;
    if (!j->is_array()) {
      fail(path + "." + key, "expected an array");
      return empty;
    }
    return *j;
  }
};

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

template <class C>
std::set<std::string> to_set(const C& c) {
  return {c.begin(), c.end()};
}

ThingScript read_script(Reader& r, const json& j, const std::string& path) {
  ThingScript s;
  if (!r.object(j, path, {"on_offer", "reply_delay_ms", "bid_delay_ms", "bids", "service_outputs",
                          "broadcast_content", "on_activity"})) {
    return s;
  }
  const std::string reply = r.str(j, "on_offer", path, false, "accept");
  if (auto v = offer_reply_from_string(reply)) {
    s.on_offer = *v;
  } else {
    r.fail(path + ".on_offer", "unknown reply " + reply);
  }
  s.reply_delay_ms = r.integer(j, "reply_delay_ms", path, false, 0);
  s.bid_delay_ms = r.integer(j, "bid_delay_ms", path, false, 0);
  s.broadcast_content = r.boolean(j, "broadcast_content", path, true);
  if (const json* b = r.field(j, "bids", path, false)) {
    if (!b->is_object()) r.fail(path + ".bids", "expected an object");
    else
      for (const auto& [k, v] : b->items()) {
        if (v.is_number()) s.bids[k] = v.get<double>();
        else r.fail(path + ".bids." + k, "expected a number");
      }
  }
  for (const char* key : {"service_outputs", "on_activity"}) {
    const json* m = r.field(j, key, path, false);
    if (m == nullptr) continue;
    if (!m->is_object()) {
      r.fail(path + "." + key, "expected an object");
      continue;
    }
    auto& dst = std::string(key) == "service_outputs" ? s.service_outputs : s.on_activity;
    for (const auto& [k, v] : m->items()) {
      if (v.is_string()) dst[k] = v.get<std::string>();
      else r.fail(path + "." + key + "." + k, "expected a string");
    }
  }
  return s;
}

ScenarioThing read_thing(Reader& r, const json& j, const std::string& path) {
  ScenarioThing st;
  if (!r.object(j, path, {"id", "capabilities", "location", "platform", "protocols", "attributes", "script"})) return st;
  Thing& t = st.thing;
  t.id = ThingId{r.str(j, "id", path)};
  t.capabilities = to_set(r.strings(j, "capabilities", path));
  if (const json* loc = r.field(j, "location", path, false)) t.location = r.point(*loc, path + ".location");
  t.platform = r.str(j, "platform", path, false);
  t.protocols = to_set(r.strings(j, "protocols", path));
  if (const json* a = r.field(j, "attributes", path, false)) {
    if (!a->is_object()) r.fail(path + ".attributes", "expected an object");
    else
      for (const auto& [k, v] : a->items()) {
        if (v.is_string()) t.attributes[k] = v.get<std::string>();
        else if (v.is_number()) t.attributes[k] = v.get<double>();
        else r.fail(path + ".attributes." + k, "expected a string or number");
      }
  }
  if (const json* s = r.field(j, "script", path, false)) st.script = read_script(r, *s, path + ".script");
  return st;
}

ServiceSpec read_service(Reader& r, const json& j, const std::string& path) {
  ServiceSpec s;
  if (!r.object(j, path, {"type", "direction", "necessity", "proximity_required"})) return s;
  s.type_id = r.str(j, "type", path);
  const std::string dir = r.str(j, "direction", path, false, "provided");
  if (dir == "provided") s.direction = Direction::Provided;
  else if (dir == "expected") s.direction = Direction::Expected;
  else r.fail(path + ".direction", "unknown direction " + dir);
  const std::string nec = r.str(j, "necessity", path, false, "mandatory");
  if (nec == "mandatory") s.necessity = Necessity::Mandatory;
  else if (nec == "optional") s.necessity = Necessity::Optional;
  else r.fail(path + ".necessity", "unknown necessity " + nec);
  s.proximity_required = r.boolean(j, "proximity_required", path, true);
  return s;
}

Condition read_condition(Reader& r, const json& j, const std::string& path) {
  Condition c;
  const std::string kind = r.str(j, "kind", path);
  if (auto k = condition_kind_from_string(kind)) c.kind = *k;
  else r.fail(path + ".kind", "unknown condition kind " + kind);
  c.payload_pattern = r.str(j, "pattern", path);
  return c;
}

Role read_role(Reader& r, const json& j, const std::string& path) {
  Role role;
  if (!r.object(j, path, {"name", "compulsory", "max_instances", "services", "conditions", "invocation"})) return role;
  role.name = r.str(j, "name", path);
  role.compulsory = r.boolean(j, "compulsory", path, false);
  if (r.field(j, "max_instances", path, false)) {
    const auto n = r.integer(j, "max_instances", path, false, 1);
    if (n < 0) r.fail(path + ".max_instances", "must be non-negative");
    else role.max_instances = static_cast<std::size_t>(n);
  }
  const json& services = r.array(j, "services", path);
  for (std::size_t i = 0; i < services.size(); ++i) {
    role.services.push_back(read_service(r, services[i], at(path + ".services", i)));
  }
  const json& conds = r.array(j, "conditions", path);
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const std::string p = at(path + ".conditions", i);
    if (r.object(conds[i], p, {"kind", "pattern"})) role.conditions.push_back(read_condition(r, conds[i], p));
  }
  const json& inv = r.array(j, "invocation", path);
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const std::string p = at(path + ".invocation", i);
    if (!r.object(inv[i], p, {"kind", "pattern", "service"})) continue;
    const Condition c = read_condition(r, inv[i], p);
    if (role.invocation_table.contains(c)) r.fail(p, "duplicate invocation trigger");
    role.invocation_table[c] = r.str(inv[i], "service", p);
  }
  return role;
}

Constraint read_constraint(Reader& r, const json& j, const std::string& path) {
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return Constraint::of(RequiresCapability{});
  }
  const std::string type = r.str(j, "type", path);
  if (type == "within_radius") {
    r.object(j, path, {"type", "center", "radius"});
    Point c;
    if (const json* cj = r.field(j, "center", path, true)) c = r.point(*cj, path + ".center");
    const double radius = r.number(j, "radius", path, true, 0.0);
    if (radius < 0) r.fail(path + ".radius", "must be non-negative");
    return Constraint::of(WithinRadius{c, radius});
  }
  if (type == "has_attribute") {
    r.object(j, path, {"type", "key", "value"});
    HasAttribute h{r.str(j, "key", path), std::string{}};
    if (const json* v = r.field(j, "value", path, true)) {
      if (v->is_string()) h.value = v->get<std::string>();
      else if (v->is_number()) h.value = v->get<double>();
      else r.fail(path + ".value", "expected a string or number");
    }
    return Constraint::of(h);
  }
  if (type == "supports_protocol") {
    r.object(j, path, {"type", "protocol"});
    return Constraint::of(SupportsProtocol{r.str(j, "protocol", path)});
  }
  if (type == "max_latency") {
    r.object(j, path, {"type", "ms"});
    return Constraint::of(MaxLatency{r.number(j, "ms", path, true, 0.0)});
  }
  if (type == "requires_capability") {
    r.object(j, path, {"type", "service"});
    return Constraint::of(RequiresCapability{r.str(j, "service", path)});
  }
  if (!type.empty()) r.fail(path + ".type", "unknown constraint type " + type);
  return Constraint::of(RequiresCapability{});
}

ConfigurationTemplate read_template(Reader& r, const json& j, const std::string& path,
                                    const std::map<std::string, Role>& roles) {
  ConfigurationTemplate t;
  if (!r.object(j, path, {"name", "purpose", "roles", "environment", "all_optional", "auction_assignment",
                          "bid_window_ms", "allow_multi_role", "offer_on_enter"})) {
    return t;
  }
  t.name = r.str(j, "name", path);
  if (const json* p = r.field(j, "purpose", path, true)) {
    const std::string pp = path + ".purpose";
    if (r.object(*p, pp, {"tag", "required_capabilities"})) {
      t.purpose.tag = r.str(*p, "tag", pp);
      t.purpose.required_capabilities = to_set(r.strings(*p, "required_capabilities", pp));
    }
  }
  const auto names = r.strings(j, "roles", path, true);
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto it = roles.find(names[i]);
    if (it == roles.end()) r.fail(at(path + ".roles", i), "unknown role " + names[i]);
    else t.roles.push_back(it->second);
  }
  const json& env = r.array(j, "environment", path);
  for (std::size_t i = 0; i < env.size(); ++i) {
    t.environment.constraints.push_back(read_constraint(r, env[i], at(path + ".environment", i)));
  }
  t.all_optional = r.boolean(j, "all_optional", path, false);
  t.auction_assignment = r.boolean(j, "auction_assignment", path, false);
  t.bid_window_ms = r.integer(j, "bid_window_ms", path, false, 500);
  t.policy.allow_multi_role = r.boolean(j, "allow_multi_role", path, false);
  if (r.field(j, "offer_on_enter", path, false)) t.offer_on_enter = r.str(j, "offer_on_enter", path);
  return t;
}

EventRule read_event_rule(Reader& r, const json& j, const std::string& path) {
  EventRule e;
  if (!r.object(j, path, {"sensor", "window_ms", "aggregate", "threshold", "region", "tag"})) return e;
  e.sensor = r.str(j, "sensor", path);
  e.window_ms = r.integer(j, "window_ms", path, true, 1000);
  const std::string agg = r.str(j, "aggregate", path);
  if (auto a = aggregate_from_string(agg)) e.aggregate = *a;
  else if (!agg.empty()) r.fail(path + ".aggregate", "unknown aggregate " + agg);
  e.threshold = r.number(j, "threshold", path, false, e.aggregate == Aggregate::InsideRegion ? 1.0 : 0.0);
  const json& region = r.array(j, "region", path);
  for (std::size_t i = 0; i < region.size(); ++i) e.region.push_back(r.point(region[i], at(path + ".region", i)));
  e.tag = r.str(j, "tag", path);
  return e;
}

ActivityRule read_activity_rule(Reader& r, const json& j, const std::string& path) {
  ActivityRule a;
  if (!r.object(j, path, {"patterns", "gap_ms", "tag"})) return a;
  a.patterns = r.strings(j, "patterns", path, true);
  a.gap_ms = r.integer(j, "gap_ms", path, false, 0);
  a.tag = r.str(j, "tag", path);
  return a;
}

TimedGoal read_goal(Reader& r, const json& j, const std::string& path) {
  TimedGoal g;
  if (!r.object(j, path, {"at_ms", "user", "tag", "required_capabilities", "host"})) return g;
  g.at_ms = r.integer(j, "at_ms", path, true, 0);
  g.goal.user = r.str(j, "user", path);
  g.goal.tag = r.str(j, "tag", path);
  g.goal.required_capabilities = to_set(r.strings(j, "required_capabilities", path, true));
  if (r.field(j, "host", path, false)) g.host = ThingId{r.str(j, "host", path)};
  return g;
}

std::optional<SignalValue> read_signal_value(Reader& r, const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array()) return r.point(j, path);
  r.fail(path, "expected a number or [x, y]");
  return std::nullopt;
}

void read_world_event(Reader& r, const json& j, const std::string& path, std::vector<WorldEvent>& out) {
  if (!j.is_object()) {
    r.fail(path, "expected an object");
    return;
  }
  const SimTime t = r.integer(j, "at_ms", path, true, 0);
  const std::string type = r.str(j, "type", path);
  if (type == "request_role") {
    r.object(j, path, {"at_ms", "type", "thing", "config", "role"});
    out.push_back({t, RequestRoleAction{r.str(j, "thing", path), r.str(j, "config", path), r.str(j, "role", path)}});
  } else if (type == "leave") {
    r.object(j, path, {"at_ms", "type", "thing", "config"});
    out.push_back({t, LeaveAction{r.str(j, "thing", path), r.str(j, "config", path)}});
  } else if (type == "invoke") {
    r.object(j, path, {"at_ms", "type", "caller", "config", "service", "args"});
    out.push_back({t, InvokeAction{r.str(j, "caller", path), r.str(j, "config", path), r.str(j, "service", path),
                                   r.str(j, "args", path, false)}});
  } else if (type == "statement") {
    r.object(j, path, {"at_ms", "type", "user", "key", "value"});
    out.push_back({t, StatementAction{r.str(j, "user", path), r.str(j, "key", path), r.str(j, "value", path)}});
  } else if (type == "mutate_role") {
    r.object(j, path, {"at_ms", "type", "config", "role", "services"});
    MutateRoleAction m{r.str(j, "config", path), r.str(j, "role", path), {}};
    const json& services = r.array(j, "services", path);
    for (std::size_t i = 0; i < services.size(); ++i) {
      m.services.push_back(read_service(r, services[i], at(path + ".services", i)));
    }
    out.push_back({t, std::move(m)});
  } else if (type == "move") {
    r.object(j, path, {"at_ms", "type", "thing", "to"});
    Point to;
    if (const json* p = r.field(j, "to", path, true)) to = r.point(*p, path + ".to");
    out.push_back({t, MoveAction{r.str(j, "thing", path), to}});
  } else if (type == "signal") {
    r.object(j, path, {"at_ms", "type", "source", "sensor", "value"});
    const std::string source = r.str(j, "source", path);
    const std::string sensor = r.str(j, "sensor", path);
    if (const json* v = r.field(j, "value", path, true)) {
      if (auto value = read_signal_value(r, *v, path + ".value")) {
        out.push_back({t, SignalAction{Signal{source, sensor, t, *value}}});
      }
    }
  } else if (type == "signals") {
    // A periodic series, expanded into one signal event per value.
    r.object(j, path, {"at_ms", "type", "source", "sensor", "period_ms", "values"});
    const std::string source = r.str(j, "source", path);
    const std::string sensor = r.str(j, "sensor", path);
    const SimTime period = r.integer(j, "period_ms", path, true, 1000);
    if (period <= 0) r.fail(path + ".period_ms", "must be positive");
    const json& values = r.array(j, "values", path, true);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const SimTime ts = t + static_cast<SimTime>(i) * period;
      if (auto value = read_signal_value(r, values[i], at(path + ".values", i))) {
        out.push_back({ts, SignalAction{Signal{source, sensor, ts, *value}}});
      }
    }
  } else if (!type.empty()) {
    r.fail(path + ".type", "unknown world event type " + type);
  }
}

SimSettings read_sim(Reader& r, const json& j, const std::string& path) {
  SimSettings s;
  if (!r.object(j, path, {"seed", "default_latency_ms", "drop_probability", "handshake_timeout_ms", "links"})) return s;
  if (const json* seed = r.field(j, "seed", path, false)) {
    if (seed->is_number_unsigned()) s.seed = seed->get<std::uint64_t>();
    else if (seed->is_number_integer() && seed->get<std::int64_t>() >= 0) s.seed = seed->get<std::uint64_t>();
    else r.fail(path + ".seed", "expected an unsigned integer");
  }
  s.default_latency_ms = r.integer(j, "default_latency_ms", path, false, 10);
  s.drop_probability = r.number(j, "drop_probability", path, false, 0.0);
  s.handshake_timeout_ms = r.integer(j, "handshake_timeout_ms", path, false, 2000);
  const json& links = r.array(j, "links", path);
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string p = at(path + ".links", i);
    if (!r.object(links[i], p, {"from", "to", "latency_ms"})) continue;
    s.links.push_back(LinkSpec{r.str(links[i], "from", p), r.str(links[i], "to", p),
                               r.integer(links[i], "latency_ms", p, true, 0)});
  }
  return s;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

json point_json(const Point& p) { return json::array({p.x, p.y}); }

json service_json(const ServiceSpec& s) {
  json j;
  j["type"] = s.type_id;
  j["direction"] = s.direction == Direction::Provided ? "provided" : "expected";
  j["necessity"] = s.necessity == Necessity::Mandatory ? "mandatory" : "optional";
  j["proximity_required"] = s.proximity_required;
  return j;
}

json attr_json(const AttributeValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

json constraint_json(const Constraint& c) {
  struct V {
    json operator()(const WithinRadius& p) const {
      return {{"type", "within_radius"}, {"center", point_json(p.center)}, {"radius", p.radius}};
    }
    json operator()(const HasAttribute& p) const {
      return {{"type", "has_attribute"}, {"key", p.key}, {"value", attr_json(p.value)}};
    }
    json operator()(const SupportsProtocol& p) const { return {{"type", "supports_protocol"}, {"protocol", p.name}}; }
    json operator()(const MaxLatency& p) const { return {{"type", "max_latency"}, {"ms", p.ms}}; }
    json operator()(const RequiresCapability& p) const {
      return {{"type", "requires_capability"}, {"service", p.service}};
    }
  };
  return std::visit(V{}, c.predicate);
}

json signal_value_json(const SignalValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return point_json(std::get<Point>(v));
}

json world_event_json(const WorldEvent& e) {
  struct V {
    SimTime t;
    json operator()(const RequestRoleAction& a) const {
      return {{"at_ms", t}, {"type", "request_role"}, {"thing", a.thing.value}, {"config", a.config}, {"role", a.role}};
    }
    json operator()(const LeaveAction& a) const {
      return {{"at_ms", t}, {"type", "leave"}, {"thing", a.thing.value}, {"config", a.config}};
    }
    json operator()(const InvokeAction& a) const {
      return {{"at_ms", t}, {"type", "invoke"}, {"caller", a.caller.value}, {"config", a.config},
              {"service", a.service}, {"args", a.args}};
    }
    json operator()(const StatementAction& a) const {
      return {{"at_ms", t}, {"type", "statement"}, {"user", a.user}, {"key", a.key}, {"value", a.value}};
    }
    json operator()(const MutateRoleAction& a) const {
      json services = json::array();
      for (const auto& s : a.services) services.push_back(service_json(s));
      return {{"at_ms", t}, {"type", "mutate_role"}, {"config", a.config}, {"role", a.role}, {"services", services}};
    }
    json operator()(const MoveAction& a) const {
      return {{"at_ms", t}, {"type", "move"}, {"thing", a.thing.value}, {"to", point_json(a.to)}};
    }
    json operator()(const SignalAction& a) const {
      return {{"at_ms", t}, {"type", "signal"}, {"source", a.signal.source.value}, {"sensor", a.signal.sensor},
              {"value", signal_value_json(a.signal.value)}};
    }
  };
  return std::visit(V{e.at_ms}, e.action);
}

std::optional<std::size_t> config_number(const std::string& id) {
  if (id.size() < 2 || id[0] != 'C') return std::nullopt;
  std::size_t n = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return std::nullopt;
    n = n * 10 + static_cast<std::size_t>(id[i] - '0');
  }
  return n;
}

}  // namespace

std::vector<Thing> ScenarioDoc::world() const {
  std::vector<Thing> out;
  out.reserve(things.size());
  for (const auto& t : things) out.push_back(t.thing);
  return out;
}

const ScenarioThing* ScenarioDoc::find_thing(const ThingId& id) const {
  for (const auto& t : things) {
    if (t.thing.id == id) return &t;
  }
  return nullptr;
}

std::vector<std::string> validate_scenario(const ScenarioDoc& doc) {
  std::vector<std::string> out;
  auto fail = [&](const std::string& path, const std::string& what) { out.push_back(path + ": " + what); };

  if (doc.schema_version != kScenarioSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(doc.schema_version));
  }
  if (doc.things.empty()) fail("things", "no things");

  std::set<ServiceTypeId> services;
  for (std::size_t i = 0; i < doc.services.size(); ++i) {
    if (doc.services[i].empty()) fail(at("services", i), "empty service id");
    if (!services.insert(doc.services[i]).second) fail(at("services", i), "duplicate service " + doc.services[i]);
  }
  auto need_service = [&](const std::string& path, const ServiceTypeId& s) {
    if (!services.contains(s)) fail(path, "undeclared service " + s);
  };

  std::set<ThingId> things;
  for (std::size_t i = 0; i < doc.things.size(); ++i) {
    const auto& st = doc.things[i];
    const std::string p = at("things", i);
    if (st.thing.id.value.empty()) fail(p + ".id", "empty thing id");
    if (!things.insert(st.thing.id).second) fail(p + ".id", "duplicate thing " + st.thing.id.value);
    for (const auto& c : st.thing.capabilities) need_service(p + ".capabilities", c);
    for (const auto& [s, _] : st.script.service_outputs) need_service(p + ".script.service_outputs", s);
    if (st.script.reply_delay_ms < 0 || st.script.bid_delay_ms < 0) fail(p + ".script", "negative delay");
  }
  auto need_thing = [&](const std::string& path, const ThingId& t) {
    if (!things.contains(t)) fail(path, "unknown thing " + t.value);
  };

  std::set<std::string> roles;
  for (std::size_t i = 0; i < doc.roles.size(); ++i) {
    const auto& role = doc.roles[i];
    const std::string p = at("roles", i);
    if (!roles.insert(role.name).second) fail(p + ".name", "duplicate role " + role.name);
    for (const auto& s : role.services) need_service(p + ".services", s.type_id);
    for (const auto& [_, s] : role.invocation_table) need_service(p + ".invocation", s);
    for (const auto& v : validate_role(role).violations) fail(p, v.code + (v.detail.empty() ? "" : " " + v.detail));
  }
  for (std::size_t i = 0; i < doc.things.size(); ++i) {
    for (const auto& [tag, role] : doc.things[i].script.on_activity) {
      if (!roles.contains(role)) fail(at("things", i) + ".script.on_activity." + tag, "unknown role " + role);
    }
  }

  std::set<std::string> templates;
  for (std::size_t i = 0; i < doc.templates.size(); ++i) {
    const auto& tpl = doc.templates[i];
    const std::string p = at("templates", i);
    if (!templates.insert(tpl.name).second) fail(p + ".name", "duplicate template " + tpl.name);
    for (const auto& s : tpl.purpose.required_capabilities) need_service(p + ".purpose", s);
    for (const auto& c : tpl.environment.constraints) {
      if (const auto* rc = std::get_if<RequiresCapability>(&c.predicate)) need_service(p + ".environment", rc->service);
    }
    for (const auto& r : tpl.roles) {
      if (!roles.contains(r.name)) fail(p + ".roles", "unknown role " + r.name);
    }
    for (const auto& problem : validate_template(tpl)) {
      // Role-level violations are already reported under roles[].
      if (problem.find(": ") == std::string::npos) fail(p, problem);
    }
  }

  for (std::size_t i = 0; i < doc.event_rules.size(); ++i) {
    for (const auto& problem : validate_rule(doc.event_rules[i])) fail(at("event_rules", i), problem);
  }
  for (std::size_t i = 0; i < doc.activity_rules.size(); ++i) {
    for (const auto& problem : validate_rule(doc.activity_rules[i])) fail(at("activity_rules", i), problem);
  }

  for (std::size_t i = 0; i < doc.goals.size(); ++i) {
    const auto& g = doc.goals[i];
    const std::string p = at("goals", i);
    if (g.at_ms < 0) fail(p + ".at_ms", "negative time");
    for (const auto& problem : validate_goal(g.goal)) fail(p, problem);
    for (const auto& s : g.goal.required_capabilities) need_service(p + ".required_capabilities", s);
    if (g.host) need_thing(p + ".host", *g.host);
  }

  auto need_config = [&](const std::string& path, const std::string& id) {
    auto n = config_number(id);
    if (!n || *n == 0 || *n > doc.goals.size()) fail(path, "unknown configuration " + id);
  };
  auto need_role = [&](const std::string& path, const std::string& r) {
    if (!roles.contains(r)) fail(path, "unknown role " + r);
  };
  std::map<std::pair<ThingId, std::string>, std::set<SimTime>> streams;
  for (std::size_t i = 0; i < doc.world_events.size(); ++i) {
    const auto& e = doc.world_events[i];
    const std::string p = at("world_events", i);
    if (e.at_ms < 0) fail(p + ".at_ms", "negative time");
    std::visit(
        [&](const auto& a) {
          using A = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<A, RequestRoleAction>) {
            need_thing(p + ".thing", a.thing);
            need_config(p + ".config", a.config);
            need_role(p + ".role", a.role);
          } else if constexpr (std::is_same_v<A, LeaveAction>) {
            need_thing(p + ".thing", a.thing);
            need_config(p + ".config", a.config);
          } else if constexpr (std::is_same_v<A, InvokeAction>) {
            need_thing(p + ".caller", a.caller);
            need_config(p + ".config", a.config);
            need_service(p + ".service", a.service);
          } else if constexpr (std::is_same_v<A, StatementAction>) {
            if (a.user.empty() || a.key.empty()) fail(p, "statement needs user and key");
          } else if constexpr (std::is_same_v<A, MutateRoleAction>) {
            need_config(p + ".config", a.config);
            need_role(p + ".role", a.role);
            for (const auto& s : a.services) need_service(p + ".services", s.type_id);
            for (const auto& role : doc.roles) {
              if (role.name != a.role) continue;
              Role next = role;
              next.services.insert(next.services.end(), a.services.begin(), a.services.end());
              for (const auto& v : validate_role(next).violations) fail(p + ".services", "mutation yields " + v.code);
            }
          } else if constexpr (std::is_same_v<A, MoveAction>) {
            need_thing(p + ".thing", a.thing);
          } else if constexpr (std::is_same_v<A, SignalAction>) {
            need_thing(p + ".source", a.signal.source);
            if (a.signal.sensor.empty()) fail(p + ".sensor", "empty sensor");
            if (!streams[{a.signal.source, a.signal.sensor}].insert(a.signal.timestamp).second) {
              fail(p, "duplicate signal timestamp for " + a.signal.source.value + "/" + a.signal.sensor);
            }
          }
        },
        e.action);
  }

  const auto& sim = doc.sim;
  if (sim.default_latency_ms < 0) fail("sim.default_latency_ms", "must be non-negative");
  if (!(sim.drop_probability >= 0.0 && sim.drop_probability <= 1.0)) fail("sim.drop_probability", "must be in [0, 1]");
  if (sim.handshake_timeout_ms <= 0) fail("sim.handshake_timeout_ms", "must be positive");
  for (std::size_t i = 0; i < sim.links.size(); ++i) {
    const std::string p = at("sim.links", i);
    need_thing(p + ".from", sim.links[i].from);
    need_thing(p + ".to", sim.links[i].to);
    if (sim.links[i].latency_ms < 0) fail(p + ".latency_ms", "must be non-negative");
  }
  return out;
}

ScenarioDoc parse_scenario(const std::string& text) {
  json root = json::object();
  try {
    // A blank document is an empty object; it then fails validation.
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(line, col, e.what());
  }

  Reader r;
  ScenarioDoc doc;
  if (!r.object(root, "$", {"schema_version", "name", "sim", "services", "things", "roles", "templates",
                            "event_rules", "activity_rules", "goals", "world_events"})) {
    throw ValidationError(r.problems);
  }
  doc.schema_version = static_cast<int>(r.integer(root, "schema_version", "$", true, 0));
  doc.name = r.str(root, "name", "$", false);
  if (const json* sim = r.field(root, "sim", "$", false)) doc.sim = read_sim(r, *sim, "sim");
  doc.services = r.strings(root, "services", "$");

  const json& things = r.array(root, "things", "$");
  for (std::size_t i = 0; i < things.size(); ++i) doc.things.push_back(read_thing(r, things[i], at("things", i)));

  std::map<std::string, Role> by_name;
  const json& roles = r.array(root, "roles", "$");
  for (std::size_t i = 0; i < roles.size(); ++i) {
    doc.roles.push_back(read_role(r, roles[i], at("roles", i)));
    by_name.emplace(doc.roles.back().name, doc.roles.back());
  }
  const json& templates = r.array(root, "templates", "$");
  for (std::size_t i = 0; i < templates.size(); ++i) {
    doc.templates.push_back(read_template(r, templates[i], at("templates", i), by_name));
  }
  const json& ev = r.array(root, "event_rules", "$");
  for (std::size_t i = 0; i < ev.size(); ++i) doc.event_rules.push_back(read_event_rule(r, ev[i], at("event_rules", i)));
  const json& ac = r.array(root, "activity_rules", "$");
  for (std::size_t i = 0; i < ac.size(); ++i) {
    doc.activity_rules.push_back(read_activity_rule(r, ac[i], at("activity_rules", i)));
  }
  const json& goals = r.array(root, "goals", "$");
  for (std::size_t i = 0; i < goals.size(); ++i) doc.goals.push_back(read_goal(r, goals[i], at("goals", i)));
  const json& world = r.array(root, "world_events", "$");
  for (std::size_t i = 0; i < world.size(); ++i) read_world_event(r, world[i], at("world_events", i), doc.world_events);

  auto problems = std::move(r.problems);
  for (auto& p : validate_scenario(doc)) {
    if (std::find(problems.begin(), problems.end(), p) == problems.end()) problems.push_back(std::move(p));
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return doc;
}

ScenarioDoc load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({path.string() + ": cannot read file"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

json scenario_to_json(const ScenarioDoc& doc) {
  json root;
  root["schema_version"] = doc.schema_version;
  root["name"] = doc.name;

  json sim;
  sim["seed"] = doc.sim.seed;
  sim["default_latency_ms"] = doc.sim.default_latency_ms;
  sim["drop_probability"] = doc.sim.drop_probability;
  sim["handshake_timeout_ms"] = doc.sim.handshake_timeout_ms;
  sim["links"] = json::array();
  for (const auto& l : doc.sim.links) {
    sim["links"].push_back({{"from", l.from.value}, {"to", l.to.value}, {"latency_ms", l.latency_ms}});
  }
  root["sim"] = sim;
  root["services"] = doc.services;

  root["things"] = json::array();
  for (const auto& st : doc.things) {
    const Thing& t = st.thing;
    json j;
    j["id"] = t.id.value;
    j["capabilities"] = t.capabilities;
    j["location"] = point_json(t.location);
    j["platform"] = t.platform;
    j["protocols"] = t.protocols;
    j["attributes"] = json::object();
    for (const auto& [k, v] : t.attributes) j["attributes"][k] = attr_json(v);
    json s;
    s["on_offer"] = to_string(st.script.on_offer);
    s["reply_delay_ms"] = st.script.reply_delay_ms;
    s["bid_delay_ms"] = st.script.bid_delay_ms;
    s["bids"] = json::object();
    for (const auto& [k, v] : st.script.bids) s["bids"][k] = v;
    s["service_outputs"] = json::object();
    for (const auto& [k, v] : st.script.service_outputs) s["service_outputs"][k] = v;
    s["broadcast_content"] = st.script.broadcast_content;
    s["on_activity"] = json::object();
    for (const auto& [k, v] : st.script.on_activity) s["on_activity"][k] = v;
    j["script"] = s;
    root["things"].push_back(j);
  }

  root["roles"] = json::array();
  for (const auto& role : doc.roles) {
    json j;
    j["name"] = role.name;
    j["compulsory"] = role.compulsory;
    if (role.max_instances) j["max_instances"] = *role.max_instances;
    j["services"] = json::array();
    for (const auto& s : role.services) j["services"].push_back(service_json(s));
    j["conditions"] = json::array();
    for (const auto& c : role.conditions) {
      j["conditions"].push_back({{"kind", to_string(c.kind)}, {"pattern", c.payload_pattern}});
    }
    j["invocation"] = json::array();
    for (const auto& [c, s] : role.invocation_table) {
      j["invocation"].push_back({{"kind", to_string(c.kind)}, {"pattern", c.payload_pattern}, {"service", s}});
    }
    root["roles"].push_back(j);
  }

  root["templates"] = json::array();
  for (const auto& tpl : doc.templates) {
    json j;
    j["name"] = tpl.name;
    j["purpose"] = {{"tag", tpl.purpose.tag}, {"required_capabilities", tpl.purpose.required_capabilities}};
    j["roles"] = json::array();
    for (const auto& r : tpl.roles) j["roles"].push_back(r.name);
    j["environment"] = json::array();
    for (const auto& c : tpl.environment.constraints) j["environment"].push_back(constraint_json(c));
    j["all_optional"] = tpl.all_optional;
    j["auction_assignment"] = tpl.auction_assignment;
    j["bid_window_ms"] = tpl.bid_window_ms;
    j["allow_multi_role"] = tpl.policy.allow_multi_role;
    if (tpl.offer_on_enter) j["offer_on_enter"] = *tpl.offer_on_enter;
    root["templates"].push_back(j);
  }

  root["event_rules"] = json::array();
  for (const auto& e : doc.event_rules) {
    json region = json::array();
    for (const auto& p : e.region) region.push_back(point_json(p));
    root["event_rules"].push_back({{"sensor", e.sensor}, {"window_ms", e.window_ms},
                                   {"aggregate", to_string(e.aggregate)}, {"threshold", e.threshold},
                                   {"region", region}, {"tag", e.tag}});
  }
  root["activity_rules"] = json::array();
  for (const auto& a : doc.activity_rules) {
    root["activity_rules"].push_back({{"patterns", a.patterns}, {"gap_ms", a.gap_ms}, {"tag", a.tag}});
  }
  root["goals"] = json::array();
  for (const auto& g : doc.goals) {
    json j{{"at_ms", g.at_ms},
           {"user", g.goal.user},
           {"tag", g.goal.tag},
           {"required_capabilities", g.goal.required_capabilities}};
    if (g.host) j["host"] = g.host->value;
    root["goals"].push_back(j);
  }
  root["world_events"] = json::array();
  for (const auto& e : doc.world_events) root["world_events"].push_back(world_event_json(e));
  return root;
}

std::string serialize_scenario(const ScenarioDoc& doc) { return scenario_to_json(doc).dump(2) + "\n"; }

}  // namespace emergent
