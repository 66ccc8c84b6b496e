// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "persistcheck/completeness.hpp"
#include "persistcheck/explore.hpp"
#include "persistcheck/retry.hpp"

namespace persistcheck {

using Json = nlohmann::json;

// Write-set page named by file rather than inode: inode numbers are assigned
// when the initial state is built, so scenario files stay stable.
struct ScenarioPage {
  std::string file;
  PageIndex page = 0;
  std::uint32_t version = 1;
};

struct Scenario {
  std::string name;
  std::string kind = "model";  // model | storm | rseq | protocol
  std::string profile_name = "ext4-ordered";
  DeviceConfig device;
  bool fua_all_writes = false;
  std::vector<std::string> initial_files;
  Workload workload;
  std::vector<ScenarioPage> write_set_pages;  // empty: derived from workload
  int max_faults = 0;
  bool allow_crash = false;
  std::vector<int> crash_positions;
  std::vector<std::string> checks;
  std::optional<StormConfig> storm;
  std::optional<RseqConfig> rseq;
  std::optional<Protocol> protocol;
};

namespace detail {

inline const Json& need(const Json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end())
    throw ConfigError(detail::cat("missing field '", key, "' in ", where));
  return *it;
}

inline WorkloadOp op_from_json(const Json& j) {
  std::string op = need(j, "op", "workload entry").get<std::string>();
  if (op == "create")
    return OpCreate{need(j, "path", "create").get<std::string>(),
                    j.value("exclusive", true)};
  if (op == "write")
    return OpWrite{need(j, "path", "write").get<std::string>(),
                   j.value("page", PageIndex{0})};
  if (op == "fsync")
    return OpFsync{need(j, "path", "fsync").get<std::string>(), j.value("retry", false)};
  if (op == "rename")
    return OpRename{need(j, "from", "rename").get<std::string>(),
                    need(j, "to", "rename").get<std::string>()};
  if (op == "unlink") return OpUnlink{need(j, "path", "unlink").get<std::string>()};
  if (op == "fsync-dir") return OpFsyncDir{};
  if (op == "read") return OpRead{need(j, "path", "read").get<std::string>()};
  throw ConfigError("unknown workload op: " + op);
}

inline Json op_to_json(const WorkloadOp& op) {
  struct V {
    Json operator()(const OpCreate& o) const {
      return Json{{"op", "create"}, {"path", o.path}, {"exclusive", o.exclusive}};
    }
    Json operator()(const OpWrite& o) const {
      return Json{{"op", "write"}, {"path", o.path}, {"page", o.index}};
    }
    Json operator()(const OpFsync& o) const {
      return Json{{"op", "fsync"}, {"path", o.path}, {"retry", o.retry}};
    }
    Json operator()(const OpRename& o) const {
      return Json{{"op", "rename"}, {"from", o.from}, {"to", o.to}};
    }
    Json operator()(const OpUnlink& o) const {
      return Json{{"op", "unlink"}, {"path", o.path}};
    }
    Json operator()(const OpFsyncDir&) const { return Json{{"op", "fsync-dir"}}; }
    Json operator()(const OpRead& o) const {
      return Json{{"op", "read"}, {"path", o.path}};
    }
  };
  return std::visit(V{}, op);
}

}  // namespace detail

inline Scenario scenario_from_json(const Json& j) {
  Scenario sc;
  sc.name = detail::need(j, "name", "scenario").get<std::string>();
  sc.kind = j.value("kind", std::string("model"));
  if (sc.kind != "model" && sc.kind != "storm" && sc.kind != "rseq" &&
      sc.kind != "protocol")
    throw ConfigError("unknown scenario kind: " + sc.kind);

  if (j.contains("filesystem")) {
    sc.profile_name = j["filesystem"].value("profile", sc.profile_name);
    profile_from_name(sc.profile_name);  // fail fast on unknown names
  }
  if (j.contains("device")) {
    const Json& d = j["device"];
    sc.device.volatile_cache_present = d.value("volatile_cache_present", true);
    sc.device.volatile_cache_enabled = d.value("volatile_cache_enabled", true);
    sc.device.fua_supported = d.value("fua_supported", false);
    sc.device.plp = d.value("plp", false);
    sc.device.validate();
  }
  sc.fua_all_writes = j.value("fua_all_writes", false);
  if (j.contains("initial_files"))
    sc.initial_files = j["initial_files"].get<std::vector<std::string>>();
  if (j.contains("workload"))
    for (const Json& e : j["workload"]) sc.workload.push_back(detail::op_from_json(e));
  if (j.contains("write_set"))
    for (const Json& e : j["write_set"])
      sc.write_set_pages.push_back(
          ScenarioPage{detail::need(e, "file", "write_set").get<std::string>(),
                       e.value("page", PageIndex{0}), e.value("version", 1u)});
  if (j.contains("bounds")) {
    const Json& b = j["bounds"];
    sc.max_faults = b.value("max_faults", 0);
    sc.allow_crash = b.value("allow_crash", false);
    if (b.contains("crash_positions"))
      sc.crash_positions = b["crash_positions"].get<std::vector<int>>();
    if (sc.max_faults < 0) throw ConfigError("bounds.max_faults must be >= 0");
  }
  if (j.contains("checks")) sc.checks = j["checks"].get<std::vector<std::string>>();

  if (j.contains("storm")) {
    const Json& t = j["storm"];
    StormConfig c;
    c.servers = t.value("servers", c.servers);
    c.service_time = t.value("service_time", c.service_time);
    c.queue_limit = t.value("queue_limit", c.queue_limit);
    c.arrival_rate = t.value("arrival_rate", c.arrival_rate);
    c.spike_start = t.value("spike_start", c.spike_start);
    c.spike_duration = t.value("spike_duration", c.spike_duration);
    c.spike_multiplier = t.value("spike_multiplier", c.spike_multiplier);
    c.timeout = t.value("timeout", c.timeout);
    c.max_attempts = t.value("max_attempts", c.max_attempts);
    c.horizon = t.value("horizon", c.horizon);
    c.bucket = t.value("bucket", c.bucket);
    c.recovery_window = t.value("recovery_window", c.recovery_window);
    c.seed = t.value("seed", c.seed);
    if (t.contains("policy")) {
      const Json& p = t["policy"];
      c.policy.kind =
          policy_kind_from_string(detail::need(p, "kind", "policy").get<std::string>());
      c.policy.base = p.value("base", c.policy.base);
      c.policy.cap = p.value("cap", c.policy.cap);
    }
    c.validate();
    sc.storm = c;
  }
  if (j.contains("rseq")) {
    const Json& t = j["rseq"];
    RseqConfig c;
    c.p = t.value("p", c.p);
    c.steps = t.value("steps", c.steps);
    c.trials = t.value("trials", c.trials);
    c.seed = t.value("seed", c.seed);
    c.validate();
    sc.rseq = c;
  }
  if (j.contains("protocol")) {
    const Json& t = j["protocol"];
    Protocol p;
    p.name = t.value("name", sc.name);
    if (t.contains("initial"))
      for (const Json& e : t["initial"]) p.initial.insert(e.get<std::string>());
    for (const Json& e : detail::need(t, "steps", "protocol")) {
      ProtoStep st;
      st.name = detail::need(e, "name", "protocol step").get<std::string>();
      if (e.contains("adds"))
        st.adds = e["adds"].get<std::vector<std::string>>();
      if (e.contains("removes"))
        st.removes = e["removes"].get<std::vector<std::string>>();
      st.has_reverse = e.value("has_reverse", true);
      p.steps.push_back(std::move(st));
    }
    sc.protocol = std::move(p);
  }
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["name"] = sc.name;
  j["kind"] = sc.kind;
  j["filesystem"] = Json{{"profile", sc.profile_name}};
  j["device"] = Json{{"volatile_cache_present", sc.device.volatile_cache_present},
                     {"volatile_cache_enabled", sc.device.volatile_cache_enabled},
                     {"fua_supported", sc.device.fua_supported},
                     {"plp", sc.device.plp}};
  j["fua_all_writes"] = sc.fua_all_writes;
  j["initial_files"] = sc.initial_files;
  Json ops = Json::array();
  for (const WorkloadOp& op : sc.workload) ops.push_back(detail::op_to_json(op));
  j["workload"] = ops;
  if (!sc.write_set_pages.empty()) {
    Json ws = Json::array();
    for (const ScenarioPage& p : sc.write_set_pages)
      ws.push_back(Json{{"file", p.file}, {"page", p.page}, {"version", p.version}});
    j["write_set"] = ws;
  }
  j["bounds"] = Json{{"max_faults", sc.max_faults},
                     {"allow_crash", sc.allow_crash},
                     {"crash_positions", sc.crash_positions}};
  j["checks"] = sc.checks;
  if (sc.storm) {
    const StormConfig& c = *sc.storm;
    j["storm"] = Json{{"servers", c.servers},
                      {"service_time", c.service_time},
                      {"queue_limit", c.queue_limit},
                      {"arrival_rate", c.arrival_rate},
                      {"spike_start", c.spike_start},
                      {"spike_duration", c.spike_duration},
                      {"spike_multiplier", c.spike_multiplier},
                      {"timeout", c.timeout},
                      {"max_attempts", c.max_attempts},
                      {"policy", Json{{"kind", to_string(c.policy.kind)},
                                      {"base", c.policy.base},
                                      {"cap", c.policy.cap}}},
                      {"horizon", c.horizon},
                      {"bucket", c.bucket},
                      {"recovery_window", c.recovery_window},
                      {"seed", c.seed}};
  }
  if (sc.rseq) {
    const RseqConfig& c = *sc.rseq;
    j["rseq"] =
        Json{{"p", c.p}, {"steps", c.steps}, {"trials", c.trials}, {"seed", c.seed}};
  }
  if (sc.protocol) {
    const Protocol& p = *sc.protocol;
    Json steps = Json::array();
    for (const ProtoStep& st : p.steps)
      steps.push_back(Json{{"name", st.name},
                           {"adds", st.adds},
                           {"removes", st.removes},
                           {"has_reverse", st.has_reverse}});
    j["protocol"] = Json{{"name", p.name},
                         {"initial", std::vector<std::string>(p.initial.begin(),
                                                              p.initial.end())},
                         {"steps", steps}};
  }
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(detail::cat("invalid JSON in ", path, ": ", e.what()));
  }
  return scenario_from_json(j);
}

// Resolve the scenario into something the exploration engine can run. File
// names in the write-set map to the inode ids make_initial_state assigns.
inline ScenarioRuntime to_runtime(const Scenario& sc) {
  ScenarioRuntime rt;
  rt.profile = profile_from_name(sc.profile_name);
  rt.device = sc.device;
  rt.fua_all_writes = sc.fua_all_writes;
  rt.initial = make_initial_state(sc.initial_files);
  rt.workload = sc.workload;
  rt.max_faults = sc.max_faults;
  rt.allow_crash = sc.allow_crash;
  rt.crash_positions = sc.crash_positions;
  for (const ScenarioPage& p : sc.write_set_pages) {
    auto ino = rt.initial.resolve(p.file);
    if (!ino)
      throw ConfigError(detail::cat("write_set names unknown initial file '", p.file, "'"));
    rt.write_set.pages.push_back(
        PageWrite{PageKey{*ino, p.page}, ContentVersion{p.version}});
  }
  return rt;
}

}  // namespace persistcheck
