// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "persistcheck/scenario.hpp"

namespace persistcheck {

enum class Verdict { Holds, Violated, WitnessFound, StructurallyIncomplete };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Violated: return "violated";
    case Verdict::WitnessFound: return "witness-found";
    case Verdict::StructurallyIncomplete: return "structurally-incomplete";
  }
  return "?";
}

// A finding is any verdict that merits a nonzero exit code.
inline bool verdict_is_finding(Verdict v) { return v != Verdict::Holds; }

// A replayable annotated run, the exportable half of a witness.
struct WitnessRun {
  std::string label;
  FaultSchedule schedule;
  std::vector<Event> events;
  std::vector<TraceRecord> trace;
  bool durable = false;
};

struct CheckReport {
  std::string check;
  std::string scenario;
  Verdict verdict = Verdict::Holds;
  Json details;
  std::vector<WitnessRun> witnesses;
};

namespace detail {

// Total order on schedules: fewer faults first, then lexicographic decisions,
// then crash plan. Keeps witness selection deterministic.
inline bool schedule_less(const FaultSchedule& a, const FaultSchedule& b) {
  if (a.fault_count() != b.fault_count()) return a.fault_count() < b.fault_count();
  if (a.decisions != b.decisions) return a.decisions < b.decisions;
  bool ac = a.crash.has_value(), bc = b.crash.has_value();
  if (ac != bc) return !ac;
  if (!ac) return false;
  return *a.crash < *b.crash;
}

inline std::string trace_key(const std::vector<TraceRecord>& trace) {
  return trace_to_string(trace);
}

inline WitnessRun make_witness(const ScenarioRuntime& rt, const FaultSchedule& sched,
                               const std::string& label) {
  RunResult run = run_schedule(rt, sched, true);
  WitnessRun w;
  w.label = label;
  w.schedule = sched;
  w.events = run.events;
  w.trace = run.step_results;
  w.durable = run.durable_at.back();
  return w;
}

inline Json trace_json(const std::vector<TraceRecord>& trace) {
  Json arr = Json::array();
  for (const TraceRecord& r : trace) arr.push_back(Json{{"syscall", r.syscall},
                                                        {"result", r.result}});
  return arr;
}

inline Json schedule_json(const FaultSchedule& s) {
  Json j;
  Json d = Json::array();
  for (auto v : s.decisions) d.push_back(v != 0);
  j["decisions"] = d;
  j["fault_count"] = s.fault_count();
  if (s.crash)
    j["crash"] = Json{{"after_step", s.crash->after_step},
                      {"commit_mask", s.crash->commit_mask},
                      {"dirty_mask", s.crash->dirty_mask},
                      {"subset_mask", s.crash->subset_mask}};
  else
    j["crash"] = nullptr;
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// commit-boundary: two runs, one observable trace, opposite durability
//
// If any pair of fault schedules yields byte-identical syscall traces with
// the write-set durable in one and lost in the other, then no function of
// the trace, and hence no application, can decide durability. The check
// hunts for the minimal such pair.

inline CheckReport check_commit_boundary(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"commit-boundary", sc.name, Verdict::Holds, Json::object(), {}};

  struct Side {
    bool have = false;
    FaultSchedule sched;
  };
  struct Group {
    Side durable, lost;
    std::vector<TraceRecord> trace;
  };
  std::map<std::string, Group> groups;
  std::size_t schedules = 0;
  for_each_schedule(rt, [&](const RunResult& run) {
    ++schedules;
    Group& g = groups[detail::trace_key(run.step_results)];
    if (g.trace.empty()) g.trace = run.step_results;
    Side& side = run.durable_at.back() ? g.durable : g.lost;
    if (!side.have || detail::schedule_less(run.schedule, side.sched)) {
      side.have = true;
      side.sched = run.schedule;
    }
  });

  const Group* best = nullptr;
  auto pair_cost = [](const Group& g) {
    return g.durable.sched.fault_count() + g.lost.sched.fault_count();
  };
  for (const auto& [key, g] : groups) {
    if (!g.durable.have || !g.lost.have) continue;
    if (!best || pair_cost(g) < pair_cost(*best)) best = &g;
  }

  rep.details["schedules_explored"] = schedules;
  rep.details["distinct_traces"] = groups.size();
  if (!best) {
    rep.details["witness"] = nullptr;
    return rep;
  }

  rep.verdict = Verdict::WitnessFound;
  WitnessRun lost = detail::make_witness(rt, best->lost.sched, "durability-lost");
  WitnessRun kept = detail::make_witness(rt, best->durable.sched, "durability-kept");
  bool revalidated = lost.trace == best->trace && kept.trace == best->trace &&
                     !lost.durable && kept.durable;
  rep.details["witness"] =
      Json{{"shared_trace", detail::trace_json(best->trace)},
           {"lost", Json{{"schedule", detail::schedule_json(best->lost.sched)},
                         {"durable", false}}},
           {"kept", Json{{"schedule", detail::schedule_json(best->durable.sched)},
                         {"durable", true}}},
           {"revalidated", revalidated}};
  rep.witnesses.push_back(std::move(lost));
  rep.witnesses.push_back(std::move(kept));
  return rep;
}

// ---------------------------------------------------------------------------
// no-commit-time: is there a workload step after which the write-set is
// durable under every fault schedule within bounds? Reports the earliest
// such step if one exists; reports a counterexample schedule for the first
// step that looks committed in the fault-free run but is not universal.

inline CheckReport check_no_commit_time(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"no-commit-time", sc.name, Verdict::Holds, Json::object(), {}};

  const std::size_t nsteps = rt.workload.size() + 1;
  std::vector<bool> universal(nsteps, true);
  std::vector<bool> fault_free(nsteps, false);
  struct Counterexample {
    bool have = false;
    FaultSchedule sched;
  };
  std::vector<Counterexample> counter(nsteps);
  std::size_t schedules = 0;

  for_each_schedule(rt, [&](const RunResult& run) {
    ++schedules;
    if (run.schedule.decisions.empty())
      for (std::size_t k = 0; k < nsteps; ++k) fault_free[k] = run.durable_at[k];
    for (std::size_t k = 0; k < nsteps; ++k) {
      if (!run.durable_at[k]) {
        universal[k] = false;
        Counterexample& c = counter[k];
        if (!c.have || detail::schedule_less(run.schedule, c.sched)) {
          c.have = true;
          c.sched = run.schedule;
        }
      }
    }
  });

  Json cands = Json::array();
  int first_candidate = -1;
  for (std::size_t k = 0; k < nsteps; ++k) {
    if (universal[k]) {
      cands.push_back(k);
      if (first_candidate < 0) first_candidate = static_cast<int>(k);
    }
  }
  rep.details["schedules_explored"] = schedules;
  rep.details["candidates"] = cands;
  Json steps = Json::array();
  for (const WorkloadOp& op : rt.workload) steps.push_back(op_name(op));
  rep.details["workload"] = steps;

  if (first_candidate >= 0) {
    rep.verdict = Verdict::Holds;
    rep.details["commit_step"] = first_candidate;
    rep.details["commit_step_op"] =
        first_candidate == 0 ? "initial" : op_name(rt.workload[first_candidate - 1]);
    // The events of the committing step in the fault-free run show what
    // sealed the write-set (for instance a FUA data submission).
    RunResult ev = run_schedule(rt, FaultSchedule{}, true);
    Json evs = Json::array();
    for (const Event& e : ev.events)
      evs.push_back(Json{{"layer", to_string(e.layer)},
                         {"what", e.what},
                         {"fault", e.fault.empty() ? Json(nullptr) : Json(e.fault)}});
    rep.details["fault_free_events"] = evs;
    return rep;
  }

  rep.verdict = Verdict::Violated;
  rep.details["commit_step"] = nullptr;
  // First step the fault-free run would call committed, with the adversary
  // schedule that keeps the write-set volatile through that same step.
  for (std::size_t k = 0; k < nsteps; ++k) {
    if (fault_free[k] && counter[k].have) {
      rep.details["refuted_step"] = k;
      rep.details["counterexample"] = detail::schedule_json(counter[k].sched);
      rep.witnesses.push_back(
          detail::make_witness(rt, counter[k].sched, "still-volatile"));
      break;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// retry-soundness: force the first data submission to fail, let fsync report
// EIO, then watch the retry succeed while the write-set is still not
// durable. The hypothetical restore-dirty profile is run as a control: with
// the dirty bit restored on failure the retry resubmits and really commits.

inline CheckReport check_retry_soundness(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"retry-soundness", sc.name, Verdict::Holds, Json::object(), {}};

  auto first_data_fault = [](const ScenarioRuntime& r) -> int {
    RunResult probe = run_schedule(r, FaultSchedule{});
    for (std::size_t i = 0; i < probe.opportunities.size(); ++i)
      if (probe.opportunities[i].point == FaultPoint::F1_DataWrite)
        return static_cast<int>(i);
    return -1;
  };

  int idx = first_data_fault(rt);
  if (idx < 0) {
    rep.details["note"] = "workload offers no data submission to fail";
    return rep;
  }
  FaultSchedule forced;
  forced.decisions.assign(static_cast<std::size_t>(idx) + 1, 0);
  forced.decisions[static_cast<std::size_t>(idx)] = 1;

  RunResult run = run_schedule(rt, forced, true);
  const TraceRecord& last = run.step_results.back();
  bool retry_ok = last.result == "ok";
  bool durable_after = run.durable_at.back();

  rep.details["forced_schedule"] = detail::schedule_json(forced);
  rep.details["trace"] = detail::trace_json(run.step_results);
  rep.details["retry_result"] = last.result;
  rep.details["durable_after_retry"] = durable_after;

  // Control: identical scenario on the profile that restores dirty bits.
  Scenario control_sc = sc;
  control_sc.profile_name = "restore-dirty";
  ScenarioRuntime crt = to_runtime(control_sc);
  int cidx = first_data_fault(crt);
  Json control = Json::object();
  if (cidx >= 0) {
    FaultSchedule cforced;
    cforced.decisions.assign(static_cast<std::size_t>(cidx) + 1, 0);
    cforced.decisions[static_cast<std::size_t>(cidx)] = 1;
    RunResult crun = run_schedule(crt, cforced, true);
    control["profile"] = "restore-dirty";
    control["trace"] = detail::trace_json(crun.step_results);
    control["retry_result"] = crun.step_results.back().result;
    control["durable_after_retry"] = crun.durable_at.back();
    rep.witnesses.push_back(detail::make_witness(crt, cforced, "control-restore-dirty"));
  }
  rep.details["control"] = control;

  if (retry_ok && !durable_after) {
    rep.verdict = Verdict::Violated;
    rep.witnesses.insert(rep.witnesses.begin(),
                         detail::make_witness(rt, forced, "retry-unsound"));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// clean-not-durable: reach a state where every write-set page is clean in
// the page cache yet the set is not durable. Clean pages are how the kernel
// looks after both a successful writeback and a failed one. States where the
// writes were never issued are excluded: those are clean vacuously.

inline CheckReport check_clean_not_durable(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"clean-not-durable", sc.name, Verdict::Holds, Json::object(), {}};

  struct Found {
    bool have = false;
    FaultSchedule sched;
    int step = 0;
  };
  Found found;
  std::size_t schedules = 0;
  for_each_schedule(rt, [&](const RunResult& run) {
    ++schedules;
    for (std::size_t k = 0; k < run.durable_at.size(); ++k) {
      if (run.clean_at[k] && run.issued_at[k] && !run.durable_at[k]) {
        bool better = !found.have || detail::schedule_less(run.schedule, found.sched) ||
                      (run.schedule == found.sched && static_cast<int>(k) < found.step);
        if (better) {
          found.have = true;
          found.sched = run.schedule;
          found.step = static_cast<int>(k);
        }
        break;
      }
    }
  });

  rep.details["schedules_explored"] = schedules;
  if (!found.have) {
    rep.details["witness"] = nullptr;
    return rep;
  }
  rep.verdict = Verdict::WitnessFound;
  RunResult run = run_schedule(rt, found.sched, true);
  rep.details["witness"] = Json{{"schedule", detail::schedule_json(found.sched)},
                                {"after_step", found.step},
                                {"trace", detail::trace_json(run.step_results)},
                                {"clean", true},
                                {"issued", true},
                                {"durable", false}};
  rep.witnesses.push_back(detail::make_witness(rt, found.sched, "clean-not-durable"));
  return rep;
}

// ---------------------------------------------------------------------------
// prefix-consistency: after any crash and recovery, the surviving mutations
// must form a prefix of program order. Observations are made per op against
// the recovered state; a reflected set with a hole is a violation.

namespace detail {

struct OpObservation {
  int op_index = 0;
  std::string kind;
  PageKey page{};           // write
  ContentVersion version{};  // write
  DirEntryKey entry{};       // create/unlink/rename destination
  std::optional<InodeId> want;
  DirEntryKey entry_from{};  // rename source
  InodeId moved = 0;         // rename inode
};

// Derive what each mutating op promises, using a fault-free pass to fix
// inode numbers and content versions.
inline std::vector<OpObservation> derive_observations(const ScenarioRuntime& rt) {
  RunResult run = run_schedule(rt, FaultSchedule{}, false, true);
  std::vector<OpObservation> obs;
  for (std::size_t i = 0; i < rt.workload.size(); ++i) {
    const SystemState& before = run.states_at[i];
    const SystemState& after = run.states_at[i + 1];
    const WorkloadOp& op = rt.workload[i];
    OpObservation o;
    o.op_index = static_cast<int>(i);
    if (const OpWrite* w = std::get_if<OpWrite>(&op)) {
      auto ino = before.resolve(w->path);
      if (!ino) continue;
      o.kind = "write";
      o.page = PageKey{*ino, w->index};
      o.version = ContentVersion{after.issued.at(o.page)};
    } else if (const OpCreate* c = std::get_if<OpCreate>(&op)) {
      auto ino = after.resolve(c->path);
      if (!ino || before.resolve(c->path)) continue;
      o.kind = "create";
      o.entry = DirEntryKey{kRootInode, c->path};
      o.want = *ino;
    } else if (const OpUnlink* u = std::get_if<OpUnlink>(&op)) {
      auto ino = before.resolve(u->path);
      if (!ino) continue;
      o.kind = "unlink";
      o.entry = DirEntryKey{kRootInode, u->path};
      o.want = *ino;  // reflected when no longer bound to this inode
    } else if (const OpRename* r = std::get_if<OpRename>(&op)) {
      auto ino = before.resolve(r->from);
      if (!ino) continue;
      o.kind = "rename";
      o.entry = DirEntryKey{kRootInode, r->to};
      o.entry_from = DirEntryKey{kRootInode, r->from};
      o.moved = *ino;
    } else {
      continue;  // fsync/read do not mutate
    }
    obs.push_back(o);
  }
  return obs;
}

inline bool observation_reflected(const OpObservation& o, const RecoveredState& rec) {
  const auto& ns = rec.state.ns_mem;
  auto bound = [&](const DirEntryKey& e) -> std::optional<InodeId> {
    auto it = ns.find(e);
    if (it == ns.end()) return std::nullopt;
    return it->second;
  };
  if (o.kind == "write")
    return !(rec.state.device.media.page_content(o.page) < o.version);
  if (o.kind == "create") return bound(o.entry) == o.want;
  if (o.kind == "unlink") return bound(o.entry) != o.want;
  if (o.kind == "rename")
    return bound(o.entry) == std::optional<InodeId>(o.moved) &&
           bound(o.entry_from) != std::optional<InodeId>(o.moved);
  return false;
}

inline std::string reflected_bits(const std::vector<bool>& reflected) {
  std::string s;
  for (bool b : reflected) s += b ? '1' : '0';
  return s;
}

inline bool is_prefix_closed(const std::vector<bool>& reflected) {
  bool seen_gap = false;
  for (bool b : reflected) {
    if (!b) seen_gap = true;
    else if (seen_gap) return false;
  }
  return true;
}

}  // namespace detail

inline CheckReport check_prefix_consistency(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"prefix-consistency", sc.name, Verdict::Holds, Json::object(), {}};
  std::vector<detail::OpObservation> obs = detail::derive_observations(rt);

  auto survey = [&](const ScenarioRuntime& r, const std::vector<detail::OpObservation>& os,
                    Json& out, FaultSchedule* witness, std::string* witness_bits) {
    std::set<std::string> sets;
    std::set<std::string> bad;
    std::size_t explored = 0;
    bool violated = false;
    for_each_schedule(r, [&](const RunResult& run) {
      if (run.crash) return;
      for_each_crash(r, run, [&](const CrashOutcome& oc, const RecoveredState& rec) {
        ++explored;
        std::vector<bool> reflected;
        for (const auto& o : os) reflected.push_back(detail::observation_reflected(o, rec));
        std::string bits = detail::reflected_bits(reflected);
        sets.insert(bits);
        if (!detail::is_prefix_closed(reflected)) {
          bad.insert(bits);
          if (!violated && witness) {
            FaultSchedule w = run.schedule;
            w.crash = oc.plan;
            *witness = w;
            if (witness_bits) *witness_bits = bits;
          }
          violated = true;
        }
      });
    });
    Json all = Json::array();
    for (const auto& s : sets) all.push_back(s);
    Json viol = Json::array();
    for (const auto& s : bad) viol.push_back(s);
    out["reflected_sets"] = all;
    out["violating_sets"] = viol;
    out["recovered_states_explored"] = explored;
    return violated;
  };

  FaultSchedule witness;
  std::string witness_bits;
  Json main = Json::object();
  bool violated = survey(rt, obs, main, &witness, &witness_bits);
  rep.details = main;
  Json ops = Json::array();
  for (const auto& o : obs) ops.push_back(Json{{"index", o.op_index}, {"kind", o.kind}});
  rep.details["observed_ops"] = ops;

  // Control: the same workload under data=journal, where a single global
  // transaction makes every crash all-or-nothing.
  Scenario csc = sc;
  csc.profile_name = "ext4-journal";
  ScenarioRuntime crt = to_runtime(csc);
  std::vector<detail::OpObservation> cobs = detail::derive_observations(crt);
  Json control = Json::object();
  bool cviol = survey(crt, cobs, control, nullptr, nullptr);
  control["profile"] = "ext4-journal";
  control["all_prefixes"] = !cviol;
  rep.details["control"] = control;

  if (violated) {
    rep.verdict = Verdict::Violated;
    rep.details["witness"] = Json{{"schedule", detail::schedule_json(witness)},
                                  {"reflected", witness_bits}};
    rep.witnesses.push_back(detail::make_witness(rt, witness, "non-prefix-state"));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// write-sync-rename: the classic replace-via-rename recipe. After any crash
// the target name must read as either the complete old file or the complete
// new file. Also reports whether the final, crash-free state actually made
// the new binding durable (without an fsync of the directory it is not).

inline CheckReport check_write_sync_rename(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"write-sync-rename", sc.name, Verdict::Holds, Json::object(), {}};

  // Identify the recipe's pieces from the workload's last rename.
  const OpRename* ren = nullptr;
  for (const WorkloadOp& op : rt.workload)
    if (const OpRename* r = std::get_if<OpRename>(&op)) ren = r;
  if (!ren) throw ConfigError("write-sync-rename needs a rename in the workload");
  auto old_ino = rt.initial.resolve(ren->to);
  if (!old_ino)
    throw ConfigError("write-sync-rename needs the rename target to exist initially");

  RunResult clean = run_schedule(rt, FaultSchedule{}, false, true);
  auto temp_ino = clean.final_state.resolve(ren->to);
  if (!temp_ino || *temp_ino == *old_ino)
    throw ConfigError("workload never replaces the target with a new inode");
  PageKey new_page{*temp_ino, 0};
  auto issued_it = clean.final_state.issued.find(new_page);
  ContentVersion v_new{issued_it == clean.final_state.issued.end() ? 0
                                                                   : issued_it->second};
  DirEntryKey target{kRootInode, ren->to};

  // Durability of the new file under its new name, in the crash-free run.
  WriteSet new_ws;
  if (v_new.gen > 0) new_ws.pages.push_back(PageWrite{new_page, v_new});
  new_ws.bindings.push_back(BindingExpect{target, *temp_ino});
  bool new_durable = durable(clean.final_state, new_ws);

  std::uint64_t n_old = 0, n_new = 0, n_violation = 0;
  std::size_t explored = 0;
  struct Violation {
    bool have = false;
    FaultSchedule sched;
    std::string what;
  };
  Violation first;
  std::set<std::string> distinct;

  for_each_schedule(rt, [&](const RunResult& run) {
    if (run.crash) return;
    for_each_crash(rt, run, [&](const CrashOutcome& oc, const RecoveredState& rec) {
      ++explored;
      std::string key = to_canonical_string(rec.state);
      bool fresh = distinct.insert(key).second;
      auto it = rec.state.ns_mem.find(target);
      std::optional<InodeId> bound =
          it == rec.state.ns_mem.end() ? std::nullopt
                                       : std::optional<InodeId>(it->second);
      std::string what;
      bool bad = false;
      if (bound == std::optional<InodeId>(*old_ino)) {
        if (fresh) ++n_old;
      } else if (bound == std::optional<InodeId>(*temp_ino) &&
                 !(rec.state.device.media.page_content(new_page) < v_new)) {
        if (fresh) ++n_new;
      } else {
        bad = true;
        if (fresh) ++n_violation;
        if (bound == std::optional<InodeId>(*temp_ino))
          what = detail::cat("target bound to new inode but content is v",
                             rec.state.device.media.page_content(new_page).gen,
                             ", expected v", v_new.gen);
        else if (!bound)
          what = "target name vanished";
        else
          what = detail::cat("target bound to unexpected inode ", *bound);
      }
      if (bad && !first.have) {
        FaultSchedule w = run.schedule;
        w.crash = oc.plan;
        first = Violation{true, w, what};
      }
    });
  });

  rep.details["target"] = ren->to;
  rep.details["old_inode"] = *old_ino;
  rep.details["new_inode"] = *temp_ino;
  rep.details["new_version"] = v_new.gen;
  rep.details["recovered_states_explored"] = explored;
  rep.details["distinct_recovered_states"] = distinct.size();
  rep.details["complete_old"] = n_old;
  rep.details["complete_new"] = n_new;
  rep.details["violations"] = n_violation;
  rep.details["new_state_durable_at_end"] = new_durable;

  if (first.have) {
    rep.verdict = Verdict::Violated;
    rep.details["witness"] = Json{{"schedule", detail::schedule_json(first.sched)},
                                  {"what", first.what}};
    rep.witnesses.push_back(detail::make_witness(rt, first.sched, "torn-replace"));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// completeness: interrupt/rollback analysis of an abstract protocol.

inline CheckReport check_completeness(const Scenario& sc) {
  if (!sc.protocol) throw ConfigError("completeness check needs a protocol section");
  CheckReport rep{"completeness", sc.name, Verdict::Holds, Json::object(), {}};
  int budget = sc.max_faults > 0 ? sc.max_faults : 1;
  CompletenessResult res = check_protocol(*sc.protocol, budget);

  rep.details["initial"] = detail::tokens_to_string(res.initial);
  rep.details["final"] = detail::tokens_to_string(res.final_state);
  rep.details["outcomes_explored"] = res.outcomes_explored;
  rep.details["interruption_budget"] = budget;
  Json stranded = Json::array();
  for (const StrandedOutcome& s : res.stranded)
    stranded.push_back(Json{{"state", detail::tokens_to_string(s.state)},
                            {"reason", s.reason},
                            {"interruptions", s.interruptions},
                            {"missing_reverse", s.missing_reverse}});
  rep.details["stranded"] = stranded;

  if (res.structurally_incomplete)
    rep.verdict = Verdict::StructurallyIncomplete;
  else if (!res.stranded.empty())
    rep.verdict = Verdict::Violated;
  return rep;
}

// ---------------------------------------------------------------------------
// flush-noop: on a device with no volatile cache, a flush must succeed and
// change nothing. Verifies the cache/media delta is empty across the flush
// at the end of the scenario workload.

inline CheckReport check_flush_noop(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"flush-noop", sc.name, Verdict::Holds, Json::object(), {}};
  if (rt.device.effectively_volatile())
    throw ConfigError("flush-noop expects a device without an enabled volatile cache");

  RunResult run = run_schedule(rt, FaultSchedule{});
  DeviceState before = run.final_state.device;
  DeviceState after = before;
  bool ok = issue_flush(after, rt.device);

  bool cache_empty = before.cache.empty() && after.cache.empty();
  bool media_same = to_canonical_string(before.media) == to_canonical_string(after.media);
  rep.details["flush_succeeded"] = ok;
  rep.details["cache_empty"] = cache_empty;
  rep.details["media_unchanged"] = media_same;
  rep.details["barrier_epoch_before"] = before.barrier_epoch;
  rep.details["barrier_epoch_after"] = after.barrier_epoch;
  if (!(ok && cache_empty && media_same)) rep.verdict = Verdict::Violated;
  return rep;
}

// ---------------------------------------------------------------------------
// plp-equivalence: a cache with power-loss protection admits exactly the
// same crash states as no cache at all. Compares the reachable media sets
// at every crash position.

inline CheckReport check_plp_equivalence(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  CheckReport rep{"plp-equivalence", sc.name, Verdict::Holds, Json::object(), {}};
  if (!rt.device.plp)
    throw ConfigError("plp-equivalence expects a device with plp enabled");

  ScenarioRuntime bare = rt;
  bare.device.plp = false;
  bare.device.volatile_cache_present = false;
  bare.device.volatile_cache_enabled = false;

  auto media_set = [](const ScenarioRuntime& r, int pos) {
    RunResult run = run_schedule(r, FaultSchedule{}, false, true);
    std::set<std::string> out;
    if (pos >= static_cast<int>(run.states_at.size())) return out;
    const SystemState& at = run.states_at[static_cast<std::size_t>(pos)];
    for (const CrashOutcome& oc :
         crash_states(at, r.device, r.profile, r.fua_all_writes, pos))
      out.insert(to_canonical_string(oc.media));
    return out;
  };

  Json positions = Json::array();
  bool all_equal = true;
  for (int k = 0; k <= static_cast<int>(rt.workload.size()); ++k) {
    std::set<std::string> a = media_set(rt, k);
    std::set<std::string> b = media_set(bare, k);
    bool eq = a == b;
    all_equal = all_equal && eq;
    positions.push_back(Json{{"after_step", k},
                             {"plp_states", a.size()},
                             {"bare_states", b.size()},
                             {"equal", eq}});
  }
  rep.details["positions"] = positions;
  rep.details["equivalent"] = all_equal;
  if (!all_equal) rep.verdict = Verdict::Violated;
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "commit-boundary",   "no-commit-time",    "retry-soundness",
      "clean-not-durable", "prefix-consistency", "write-sync-rename",
      "completeness",      "flush-noop",        "plp-equivalence"};
  return names;
}

inline CheckReport run_check(const Scenario& sc, const std::string& name) {
  if (name == "commit-boundary") return check_commit_boundary(sc);
  if (name == "no-commit-time") return check_no_commit_time(sc);
  if (name == "retry-soundness") return check_retry_soundness(sc);
  if (name == "clean-not-durable") return check_clean_not_durable(sc);
  if (name == "prefix-consistency") return check_prefix_consistency(sc);
  if (name == "write-sync-rename") return check_write_sync_rename(sc);
  if (name == "completeness") return check_completeness(sc);
  if (name == "flush-noop") return check_flush_noop(sc);
  if (name == "plp-equivalence") return check_plp_equivalence(sc);
  throw ConfigError("unknown check: " + name);
}

}  // namespace persistcheck
