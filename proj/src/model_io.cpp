#include "gridstore/model_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gridstore {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ParseError(msg); }

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) known = true;
    if (!known) fail(where + ": unknown key \"" + it.key() + "\"");
  }
}

Real require_number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + ": expected a number");
  return j.get<Real>();
}

int require_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) fail(where + ": expected an integer");
  return j.get<int>();
}

Cap parse_cap(const json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return Cap::unbounded();
    fail(where + ": expected a number or \"inf\"");
  }
  return Cap::finite(require_number(j, where));
}

json cap_to_json(Cap c) {
  if (c.is_unbounded()) return json("inf");
  return json(c.value());
}

std::pair<int, int> line_column_of(const std::string& text, size_t byte) {
  int line = 1, col = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::pair<Network, DemandSeries> parse_network(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column_of(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(std::string("syntax error: ") + e.what(), line, col);
  }
  if (!doc.is_object()) fail("document root must be an object");
  reject_unknown_keys(doc, "document", {"buses", "lines", "storage", "demand", "period"});
  for (const char* key : {"buses", "lines", "storage", "demand", "period"})
    if (!doc.contains(key)) fail(std::string("missing top-level key \"") + key + "\"");

  Network net;
  DemandSeries demand;
  demand.period = require_int(doc["period"], "period");

  if (!doc["buses"].is_array()) fail("buses: expected an array");
  for (const json& jb : doc["buses"]) {
    if (!jb.is_object()) fail("buses: expected objects");
    reject_unknown_keys(jb, "bus", {"id", "kind", "gen_cap", "cost", "renewable"});
    Bus b;
    if (!jb.contains("id") || !jb.contains("kind")) fail("bus: id and kind are required");
    b.id = require_int(jb["id"], "bus.id");
    const std::string kind = jb["kind"].is_string() ? jb["kind"].get<std::string>() : "";
    if (kind == "generator")
      b.kind = BusKind::Generator;
    else if (kind == "load")
      b.kind = BusKind::Load;
    else
      fail("bus " + std::to_string(b.id) + ": kind must be \"generator\" or \"load\"");
    if (jb.contains("gen_cap"))
      b.gen_cap = parse_cap(jb["gen_cap"], "bus " + std::to_string(b.id) + ".gen_cap");
    if (jb.contains("cost")) {
      const json& jc = jb["cost"];
      if (!jc.is_object()) fail("bus " + std::to_string(b.id) + ".cost: expected an object");
      reject_unknown_keys(jc, "cost", {"c2", "c1", "c0"});
      CostPoly c;
      if (jc.contains("c2")) c.c2 = require_number(jc["c2"], "cost.c2");
      if (jc.contains("c1")) c.c1 = require_number(jc["c1"], "cost.c1");
      if (jc.contains("c0")) c.c0 = require_number(jc["c0"], "cost.c0");
      b.cost = c;
    }
    if (jb.contains("renewable")) {
      if (!jb["renewable"].is_boolean()) fail("bus.renewable: expected a boolean");
      b.renewable = jb["renewable"].get<bool>();
    }
    net.buses.push_back(b);
  }

  if (!doc["lines"].is_array()) fail("lines: expected an array");
  for (const json& jl : doc["lines"]) {
    if (!jl.is_object()) fail("lines: expected objects");
    reject_unknown_keys(jl, "line", {"from", "to", "admittance", "flow_cap"});
    Line l;
    if (!jl.contains("from") || !jl.contains("to")) fail("line: from and to are required");
    l.from = require_int(jl["from"], "line.from");
    l.to = require_int(jl["to"], "line.to");
    if (jl.contains("admittance")) l.admittance = require_number(jl["admittance"], "line.admittance");
    if (jl.contains("flow_cap")) l.flow_cap = parse_cap(jl["flow_cap"], "line.flow_cap");
    net.lines.push_back(l);
  }

  const json& js = doc["storage"];
  if (!js.is_object()) fail("storage: expected an object");
  reject_unknown_keys(js, "storage",
                      {"eff_charge", "eff_discharge", "ramp_charge", "ramp_discharge"});
  if (js.contains("eff_charge")) net.storage.eff_charge = require_number(js["eff_charge"], "storage.eff_charge");
  if (js.contains("eff_discharge")) net.storage.eff_discharge = require_number(js["eff_discharge"], "storage.eff_discharge");
  if (js.contains("ramp_charge")) net.storage.ramp_charge = require_number(js["ramp_charge"], "storage.ramp_charge");
  if (js.contains("ramp_discharge")) net.storage.ramp_discharge = require_number(js["ramp_discharge"], "storage.ramp_discharge");

  const json& jd = doc["demand"];
  if (!jd.is_object()) fail("demand: expected an object of bus-id -> array");
  for (auto it = jd.begin(); it != jd.end(); ++it) {
    int id;
    try {
      size_t pos = 0;
      id = std::stoi(it.key(), &pos);
      if (pos != it.key().size()) throw std::invalid_argument(it.key());
    } catch (const std::exception&) {
      fail("demand: key \"" + it.key() + "\" is not a bus id");
    }
    if (!it.value().is_array()) fail("demand[" + it.key() + "]: expected an array");
    Vec col(it.value().size());
    Index i = 0;
    for (const json& v : it.value())
      col[i++] = require_number(v, "demand[" + it.key() + "]");
    demand.values[id] = std::move(col);
  }

  net.slack_bus = net.default_slack();
  return {std::move(net), std::move(demand)};
}

std::string serialize_network(const Network& net, const DemandSeries& demand) {
  json doc;
  doc["period"] = demand.period;
  doc["buses"] = json::array();
  for (const Bus& b : net.buses) {
    json jb;
    jb["id"] = b.id;
    jb["kind"] = b.is_generator() ? "generator" : "load";
    if (b.gen_cap) jb["gen_cap"] = cap_to_json(*b.gen_cap);
    if (b.cost) jb["cost"] = {{"c2", b.cost->c2}, {"c1", b.cost->c1}, {"c0", b.cost->c0}};
    if (b.renewable) jb["renewable"] = true;
    doc["buses"].push_back(jb);
  }
  doc["lines"] = json::array();
  for (const Line& l : net.lines) {
    json jl;
    jl["from"] = l.from;
    jl["to"] = l.to;
    jl["admittance"] = l.admittance;
    jl["flow_cap"] = cap_to_json(l.flow_cap);
    doc["lines"].push_back(jl);
  }
  doc["storage"] = {{"eff_charge", net.storage.eff_charge},
                    {"eff_discharge", net.storage.eff_discharge},
                    {"ramp_charge", net.storage.ramp_charge},
                    {"ramp_discharge", net.storage.ramp_discharge}};
  doc["demand"] = json::object();
  for (const auto& [id, col] : demand.values) {
    json arr = json::array();
    for (Index i = 0; i < col.size(); ++i) arr.push_back(col[i]);
    doc["demand"][std::to_string(id)] = arr;
  }
  return doc.dump(2) + "\n";
}

std::pair<Network, DemandSeries> load_network_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

}  // namespace gridstore
