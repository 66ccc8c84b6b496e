// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "persistcheck/faults.hpp"

namespace persistcheck {

// Everything a run needs: filesystem profile, device shape, workload and the
// write-set durability questions refer to, plus exploration bounds.
struct ScenarioRuntime {
  FsProfile profile;
  DeviceConfig device;
  bool fua_all_writes = false;
  SystemState initial;
  Workload workload;
  WriteSet write_set;  // empty: derived from the workload's final versions
  int max_faults = 0;
  bool allow_crash = false;
  std::vector<int> crash_positions;  // empty: every position 0..N

  WriteSet effective_write_set() const {
    if (!write_set.empty()) return write_set;
    return default_write_set(initial, workload);
  }
};

// Answers opportunities from a fixed decision vector and records what it saw.
class ScriptedInjector : public FaultInjector {
 public:
  explicit ScriptedInjector(std::vector<std::uint8_t> decisions)
      : decisions_(std::move(decisions)) {}

  bool decide(const Opportunity& op) override {
    encountered_.push_back(op);
    std::size_t i = next_++;
    return i < decisions_.size() && decisions_[i] != 0;
  }

  const std::vector<Opportunity>& encountered() const { return encountered_; }

 private:
  std::vector<std::uint8_t> decisions_;
  std::size_t next_ = 0;
  std::vector<Opportunity> encountered_;
};

struct RunResult {
  FaultSchedule schedule;
  WriteSet write_set;
  SystemState final_state;  // state when the run ended (pre-crash if it crashed)
  std::vector<TraceRecord> step_results;      // one per executed workload op
  std::vector<bool> durable_at;               // index = ops applied, size steps+1
  std::vector<bool> clean_at;                 // write-set pages all clean
  std::vector<bool> issued_at;                // write-set versions all written
  std::vector<Opportunity> opportunities;     // encounter order
  std::vector<Event> events;                  // populated when collect_events
  std::vector<SystemState> states_at;         // populated when keep_states
  std::optional<CrashOutcome> crash;
  std::optional<RecoveredState> recovered;

  int executed_steps() const { return static_cast<int>(step_results.size()); }
};

/**
 * Replay the workload under a fully resolved fault schedule. Deterministic:
 * the same runtime and schedule always produce the same RunResult. A crash
 * plan ends the run after its step position; the remaining ops never execute,
 * matching a real power cut mid-program.
 */
inline RunResult run_schedule(const ScenarioRuntime& rt, const FaultSchedule& schedule,
                              bool collect_events = false, bool keep_states = false) {
  RunResult out;
  out.schedule = schedule;
  out.write_set = rt.effective_write_set();

  ScriptedInjector injector(schedule.decisions);
  ExecContext ctx{rt.profile, rt.device, rt.fua_all_writes, &injector,
                  collect_events ? &out.events : nullptr};
  SystemState s = rt.initial;
  out.durable_at.push_back(durable(s, out.write_set));
  out.clean_at.push_back(write_set_clean(s, out.write_set));
  out.issued_at.push_back(write_set_issued(s, out.write_set));
  if (keep_states) out.states_at.push_back(s);

  const int crash_after = schedule.crash ? schedule.crash->after_step : -1;
  for (std::size_t i = 0; i <= rt.workload.size(); ++i) {
    if (crash_after == static_cast<int>(i)) {
      out.crash = apply_crash_plan(s, rt.device, rt.profile, rt.fua_all_writes,
                                   *schedule.crash);
      out.recovered = recover(*out.crash, s);
      break;
    }
    if (i == rt.workload.size()) break;
    s = apply_op(ctx, s, rt.workload[i]);
    out.step_results.push_back(s.trace.back());
    out.durable_at.push_back(durable(s, out.write_set));
    out.clean_at.push_back(write_set_clean(s, out.write_set));
    out.issued_at.push_back(write_set_issued(s, out.write_set));
    if (keep_states) out.states_at.push_back(s);
  }
  out.opportunities = injector.encountered();
  out.final_state = std::move(s);
  return out;
}

namespace detail {

inline FaultSchedule schedule_from_positions(const std::vector<std::size_t>& positions) {
  FaultSchedule sched;
  if (!positions.empty()) {
    sched.decisions.assign(positions.back() + 1, 0);
    for (std::size_t p : positions) sched.decisions[p] = 1;
  }
  return sched;
}

}  // namespace detail

/**
 * Enumerate all injection-only schedules with at most max_faults injections,
 * in canonical order: breadth-first by fault count, lexicographic by
 * injection positions within a count. The opportunity sequence depends on
 * earlier decisions (a retried journal write adds one, an aborted journal
 * removes the rest), so each prefix is replayed to learn how many
 * opportunities exist before extending it.
 */
inline void for_each_schedule(const ScenarioRuntime& rt,
                              const std::function<void(const RunResult&)>& visit,
                              std::size_t limit = 200000) {
  std::deque<std::vector<std::size_t>> frontier;
  frontier.push_back({});
  std::size_t emitted = 0;
  while (!frontier.empty()) {
    std::vector<std::size_t> positions = std::move(frontier.front());
    frontier.pop_front();
    FaultSchedule sched = detail::schedule_from_positions(positions);
    RunResult run = run_schedule(rt, sched);
    if (++emitted > limit)
      throw ConfigError(detail::cat("schedule enumeration exceeds bound of ", limit,
                                    " schedules; tighten max_faults or the workload"));
    if (static_cast<int>(positions.size()) < rt.max_faults) {
      std::size_t start = positions.empty() ? 0 : positions.back() + 1;
      for (std::size_t j = start; j < run.opportunities.size(); ++j) {
        std::vector<std::size_t> child = positions;
        child.push_back(j);
        frontier.push_back(std::move(child));
      }
    }
    visit(run);
  }
}

inline std::vector<RunResult> explore_schedules(const ScenarioRuntime& rt,
                                                std::size_t limit = 200000) {
  std::vector<RunResult> out;
  for_each_schedule(rt, [&](const RunResult& run) { out.push_back(run); }, limit);
  return out;
}

/**
 * Expand one completed (non-crashing) run into every crash outcome reachable
 * from it: for each allowed crash position, rebuild the state at that point
 * and enumerate crash states. The visitor receives the outcome and the
 * recovered mount. Positions beyond the executed step count are skipped.
 */
inline void for_each_crash(const ScenarioRuntime& rt, const RunResult& run,
                           const std::function<void(const CrashOutcome&,
                                                    const RecoveredState&)>& visit,
                           std::size_t limit = std::size_t{1} << 22) {
  std::vector<int> positions = rt.crash_positions;
  if (positions.empty())
    for (int k = 0; k <= run.executed_steps(); ++k) positions.push_back(k);

  // Rebuild intermediate states once, reusing the run's schedule.
  RunResult with_states = run_schedule(rt, run.schedule, false, true);
  for (int k : positions) {
    if (k < 0 || k >= static_cast<int>(with_states.states_at.size())) continue;
    const SystemState& at = with_states.states_at[static_cast<std::size_t>(k)];
    for (const CrashOutcome& outcome :
         crash_states(at, rt.device, rt.profile, rt.fua_all_writes, k, limit)) {
      RecoveredState rec = recover(outcome, at);
      visit(outcome, rec);
    }
  }
}

}  // namespace persistcheck
