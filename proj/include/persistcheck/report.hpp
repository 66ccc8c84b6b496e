// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <string>

#include "persistcheck/checks.hpp"
#include "persistcheck/retry.hpp"

namespace persistcheck {

// Reports are canonical: keys sorted (nlohmann::json is map-backed), no
// timestamps, no machine-specific content. The same inputs must produce the
// same bytes.

namespace detail {

inline Json event_json(const Event& e) {
  return Json{{"layer", to_string(e.layer)},
              {"what", e.what},
              {"fault", e.fault.empty() ? Json(nullptr) : Json(e.fault)},
              {"digest", e.digest}};
}

}  // namespace detail

inline Json report_to_json(const CheckReport& rep) {
  Json j;
  j["check"] = rep.check;
  j["scenario"] = rep.scenario;
  j["verdict"] = to_string(rep.verdict);
  j["details"] = rep.details;
  Json ws = Json::array();
  for (const WitnessRun& w : rep.witnesses) {
    Json events = Json::array();
    for (const Event& e : w.events) events.push_back(detail::event_json(e));
    ws.push_back(Json{{"label", w.label},
                      {"schedule", detail::schedule_json(w.schedule)},
                      {"trace", detail::trace_json(w.trace)},
                      {"durable", w.durable},
                      {"events", events}});
  }
  j["witnesses"] = ws;
  return j;
}

inline std::string render_json(const Json& j) { return j.dump(2) + "\n"; }

/**
 * Witness traces ship as JSON Lines: a header naming the two runs, then one
 * record per event position with the runs side by side. Runs of different
 * length pad the shorter side with null. Refuses to emit when the check
 * produced no witness runs; an empty witness file would claim evidence that
 * does not exist.
 */
inline std::string emit_witness_trace(const CheckReport& rep) {
  if (rep.witnesses.empty())
    throw ConfigError(detail::cat("check ", rep.check, " on ", rep.scenario,
                                  " produced no witness runs to emit"));
  const WitnessRun& a = rep.witnesses[0];
  const WitnessRun* b = rep.witnesses.size() > 1 ? &rep.witnesses[1] : nullptr;

  std::string out;
  Json header{{"check", rep.check},
              {"scenario", rep.scenario},
              {"verdict", to_string(rep.verdict)},
              {"a", Json{{"label", a.label},
                         {"schedule", detail::schedule_json(a.schedule)},
                         {"trace", detail::trace_json(a.trace)},
                         {"durable", a.durable}}},
              {"b", !b ? Json(nullptr)
                       : Json{{"label", b->label},
                              {"schedule", detail::schedule_json(b->schedule)},
                              {"trace", detail::trace_json(b->trace)},
                              {"durable", b->durable}}}};
  out += header.dump() + "\n";

  std::size_t n = a.events.size();
  if (b) n = std::max(n, b->events.size());
  for (std::size_t i = 0; i < n; ++i) {
    Json line{{"step", i},
              {"a", i < a.events.size() ? detail::event_json(a.events[i]) : Json(nullptr)},
              {"b", b && i < b->events.size() ? detail::event_json(b->events[i])
                                              : Json(nullptr)}};
    out += line.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation reports

inline Json storm_to_json(const StormConfig& cfg, const StormResult& r) {
  Json series = Json::array();
  for (const StormBucket& b : r.series)
    series.push_back(Json{{"t", b.t_start},
                          {"offered", b.offered},
                          {"first_attempts", b.first_attempts},
                          {"goodput", b.goodput},
                          {"queue_depth", b.queue_depth},
                          {"amplification", b.amplification}});
  return Json{
      {"kind", "retry-storm"},
      {"config", Json{{"servers", cfg.servers},
                      {"service_time", cfg.service_time},
                      {"queue_limit", cfg.queue_limit},
                      {"arrival_rate", cfg.arrival_rate},
                      {"spike_start", cfg.spike_start},
                      {"spike_duration", cfg.spike_duration},
                      {"spike_multiplier", cfg.spike_multiplier},
                      {"timeout", cfg.timeout},
                      {"max_attempts", cfg.max_attempts},
                      {"policy", Json{{"kind", to_string(cfg.policy.kind)},
                                      {"base", cfg.policy.base},
                                      {"cap", cfg.policy.cap}}},
                      {"horizon", cfg.horizon},
                      {"bucket", cfg.bucket},
                      {"recovery_window", cfg.recovery_window},
                      {"seed", cfg.seed}}},
      {"summary", Json{{"capacity", r.capacity},
                       {"demand", r.demand},
                       {"issued_attempts", r.issued_attempts},
                       {"served_in_time", r.served_in_time},
                       {"served_late", r.served_late},
                       {"rejected_retried", r.rejected_retried},
                       {"rejected_abandoned", r.rejected_abandoned},
                       {"timed_out_retried", r.timed_out_retried},
                       {"timed_out_abandoned", r.timed_out_abandoned},
                       {"undecided_at_horizon", r.undecided_at_horizon},
                       {"peak_queue", r.peak_queue},
                       {"peak_amplification", r.peak_amplification},
                       {"recovery_goodput", r.recovery_goodput},
                       {"conservation_ok", r.conservation_ok}}},
      {"series", series}};
}

inline Json rseq_to_json(const RseqConfig& cfg, const RseqResult& r) {
  return Json{{"kind", "restartable-sequence"},
              {"config", Json{{"p", cfg.p},
                              {"steps", cfg.steps},
                              {"trials", cfg.trials},
                              {"seed", cfg.seed}}},
              {"summary", Json{{"mean_attempts", r.mean_attempts},
                               {"expected", r.expected},
                               {"relative_error", r.relative_error},
                               {"total_attempts", r.total_attempts},
                               {"max_attempts_seen", r.max_attempts_seen}}}};
}

// Whole-scenario report: every check the scenario lists, or its simulation.
struct ScenarioReportResult {
  Json json;
  bool finding = false;
};

inline ScenarioReportResult scenario_report(const Scenario& sc) {
  ScenarioReportResult out;
  out.json["scenario"] = scenario_to_json(sc);
  if (sc.kind == "storm") {
    if (!sc.storm) throw ConfigError("storm scenario without a storm section");
    out.json["report"] = storm_to_json(*sc.storm, simulate_storm(*sc.storm));
    return out;
  }
  if (sc.kind == "rseq") {
    if (!sc.rseq) throw ConfigError("rseq scenario without an rseq section");
    out.json["report"] = rseq_to_json(*sc.rseq, simulate_rseq(*sc.rseq));
    return out;
  }
  Json checks = Json::array();
  for (const std::string& name : sc.checks) {
    CheckReport rep = run_check(sc, name);
    if (verdict_is_finding(rep.verdict)) out.finding = true;
    checks.push_back(report_to_json(rep));
  }
  out.json["checks"] = checks;
  return out;
}

}  // namespace persistcheck
