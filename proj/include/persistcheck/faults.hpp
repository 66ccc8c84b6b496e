// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "persistcheck/syscalls.hpp"

namespace persistcheck {

// ---------------------------------------------------------------------------
// Crash plans
//
// A crash interrupts the run after `after_step` workload steps. At that
// moment the kernel may have started committing pending transactions and
// writing back dirty pages on its own (timers, memory pressure), so a crash
// state is parameterized by three choices:
//
//   commit_mask  which pending transactions the kernel began committing
//   dirty_mask   which dirty pages writeback submitted on its own
//   subset_mask  which cache-resident device writes reached media
//
// Bit i of commit_mask selects the i-th pending transaction in id order; bit
// i of dirty_mask the i-th dirty page in key order; bit i of subset_mask the
// i-th entry of the device cache as it stands after those kernel actions.

struct CrashPlan {
  int after_step = 0;
  std::uint64_t commit_mask = 0;
  std::uint64_t dirty_mask = 0;
  std::uint64_t subset_mask = 0;
  auto operator<=>(const CrashPlan&) const = default;
};

// A fully resolved source of nondeterminism: decisions[i] answers the i-th
// fault opportunity encountered (1 = inject). Indices past the end pass.
// Replaying the same schedule against the same scenario is deterministic.
struct FaultSchedule {
  std::vector<std::uint8_t> decisions;
  std::optional<CrashPlan> crash;

  int fault_count() const {
    int n = 0;
    for (auto d : decisions) n += d ? 1 : 0;
    return n;
  }
  bool operator==(const FaultSchedule&) const = default;
};

inline std::string to_string(const FaultSchedule& sched) {
  std::string s = "[";
  for (std::size_t i = 0; i < sched.decisions.size(); ++i)
    s += sched.decisions[i] ? '1' : '0';
  s += "]";
  if (sched.crash)
    s += detail::cat(" crash(step=", sched.crash->after_step, ", commit=",
                     sched.crash->commit_mask, ", dirty=", sched.crash->dirty_mask,
                     ", subset=", sched.crash->subset_mask, ")");
  return s;
}

struct CrashOutcome {
  MediaState media;
  std::vector<JournalTxn> txns;  // descriptors with crash-time coverage applied
  CrashPlan plan;
};

namespace detail {

inline std::vector<TxnId> pending_txns(const SystemState& s) {
  std::vector<TxnId> ids;
  for (const auto& t : s.txns)
    if (t.phase == TxnPhase::Open || t.phase == TxnPhase::Logged) ids.push_back(t.id);
  return ids;
}

inline std::vector<PageKey> dirty_pages(const SystemState& s) {
  std::vector<PageKey> keys;
  for (const auto& [k, p] : s.pages)
    if (p.dirty) keys.push_back(k);
  return keys;
}

struct CrashTimeDevice {
  DeviceState device;
  std::vector<JournalTxn> txns;
};

/**
 * Apply the kernel's crash-time actions in a fixed canonical order: selected
 * transactions commit in id order (each first submits the selected dirty
 * pages of its touched files, then log blocks if still open, then flushes
 * unless the journal runs in writeback mode, then the commit record), then
 * the remaining selected dirty pages are submitted freely.
 *
 * Two deliberate asymmetries encode real journal behavior. Writeback commits
 * skip the pre-record flush, so a commit record can reach media before data
 * it logically follows. And a crash-time commit never forces unselected
 * dirty data of its files (delayed allocation): the transaction can land on
 * media while the data it describes was never even submitted.
 */
inline CrashTimeDevice crash_time_device(const SystemState& s, const DeviceConfig& cfg,
                                         const FsProfile& profile, bool fua_all_writes,
                                         std::uint64_t commit_mask,
                                         std::uint64_t dirty_mask) {
  CrashTimeDevice out{s.device, s.txns};
  const JournalMode mode = profile.journal_mode;
  std::vector<TxnId> pending = pending_txns(s);
  std::vector<PageKey> dirty = dirty_pages(s);
  if (pending.size() > 63 || dirty.size() > 63)
    throw ConfigError("crash plan mask overflow: too many pending txns or dirty pages");

  std::vector<bool> page_done(dirty.size(), false);
  auto submit_data = [&](std::size_t di, JournalTxn* cover) {
    const PageKey& k = dirty[di];
    PageWrite pw{k, s.pages.at(k).version};
    submit_write(out.device, cfg, BlockWrite{BlockKind::Data, pw, 0, fua_all_writes, 0});
    if (cover && mode == JournalMode::Ordered) cover->covered.push_back(pw);
    page_done[di] = true;
  };

  for (std::size_t ti = 0; ti < pending.size(); ++ti) {
    if (!(commit_mask >> ti & 1)) continue;
    JournalTxn* t = nullptr;
    for (auto& tx : out.txns)
      if (tx.id == pending[ti]) t = &tx;
    if (mode == JournalMode::Ordered) {
      for (std::size_t di = 0; di < dirty.size(); ++di) {
        if (page_done[di] || !(dirty_mask >> di & 1)) continue;
        if (t->touched.count(dirty[di].file)) submit_data(di, t);
      }
    }
    if (t->phase == TxnPhase::Open) {
      submit_write(out.device, cfg,
                   BlockWrite{BlockKind::JournalLog, {}, t->id, fua_all_writes, 0});
      t->phase = TxnPhase::Logged;
    }
    if (mode != JournalMode::Writeback) issue_flush(out.device, cfg);
    submit_write(out.device, cfg,
                 BlockWrite{BlockKind::JournalCommit, {}, t->id,
                            cfg.fua_supported || fua_all_writes, 0});
    t->phase = TxnPhase::CommitRecordWritten;
  }
  if (mode != JournalMode::DataJournal) {
    for (std::size_t di = 0; di < dirty.size(); ++di)
      if (!page_done[di] && (dirty_mask >> di & 1)) submit_data(di, nullptr);
  }
  return out;
}

inline std::string crash_dedupe_key(const MediaState& media,
                                    const std::vector<JournalTxn>& txns) {
  std::string key = to_canonical_string(media);
  key += "|covered:";
  for (const auto& t : txns) {
    key += detail::cat(" txn", t.id, "[");
    for (const auto& pw : t.covered) key += to_string(pw) + " ";
    key += "]";
  }
  return key;
}

}  // namespace detail

// Materialize the single crash outcome a plan describes.
inline CrashOutcome apply_crash_plan(const SystemState& s, const DeviceConfig& cfg,
                                     const FsProfile& profile, bool fua_all_writes,
                                     const CrashPlan& plan) {
  detail::CrashTimeDevice ctd = detail::crash_time_device(
      s, cfg, profile, fua_all_writes, plan.commit_mask, plan.dirty_mask);
  MediaState media = power_loss(ctd.device, cfg, plan.subset_mask);
  return CrashOutcome{std::move(media), std::move(ctd.txns), plan};
}

/**
 * Enumerate every distinct crash outcome of a state, deduplicated by the
 * surviving media image plus the coverage obligations recovery will check.
 * In data=journal mode dirty pages ride the log, so the dirty mask stays
 * zero and partial data writeback is impossible by construction. Outcomes
 * appear in canonical mask order, so the first occurrence of a media image
 * is the lexicographically smallest plan that produces it.
 */
inline std::vector<CrashOutcome> crash_states(const SystemState& s, const DeviceConfig& cfg,
                                              const FsProfile& profile, bool fua_all_writes,
                                              int after_step,
                                              std::size_t limit = std::size_t{1} << 22) {
  std::vector<TxnId> pending = detail::pending_txns(s);
  std::vector<PageKey> dirty = detail::dirty_pages(s);
  if (pending.size() > 16 || dirty.size() > 16)
    throw ConfigError("crash enumeration out of bounds: too many pending txns or dirty pages");
  const std::uint64_t cmax = std::uint64_t{1} << pending.size();
  const std::uint64_t dmax =
      profile.journal_mode == JournalMode::DataJournal ? 1 : std::uint64_t{1} << dirty.size();

  std::vector<CrashOutcome> out;
  std::set<std::string> seen;
  std::size_t visited = 0;
  for (std::uint64_t cm = 0; cm < cmax; ++cm) {
    for (std::uint64_t dm = 0; dm < dmax; ++dm) {
      detail::CrashTimeDevice ctd =
          detail::crash_time_device(s, cfg, profile, fua_all_writes, cm, dm);
      std::size_t n = power_loss_state_count(ctd.device, cfg);
      for (std::uint64_t sm = 0; sm < n; ++sm) {
        if (++visited > limit)
          throw ConfigError(detail::cat("crash enumeration exceeds bound of ", limit,
                                        " states"));
        MediaState media = power_loss(ctd.device, cfg, sm);
        std::string key = detail::crash_dedupe_key(media, ctd.txns);
        if (!seen.insert(std::move(key)).second) continue;
        out.push_back(CrashOutcome{std::move(media), ctd.txns,
                                   CrashPlan{after_step, cm, dm, sm}});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recovery

struct RecoveredState {
  SystemState state;
  std::vector<std::string> inconsistencies;
};

/**
 * Mount after a crash: replay the journal against the surviving media and
 * boot a fresh in-memory state from the result. The page cache comes up
 * cold, the journal is quiesced, and in-memory bindings mirror what replay
 * left on media. Inconsistencies are reported, never repaired: a committed
 * transaction whose covered data is missing stays visible as stale content.
 *
 * Counters (issued versions, next inode and txn ids) carry over from the
 * pre-crash state. They are the model's bookkeeping, not filesystem state;
 * keeping them lets durability questions about the old write-set still be
 * asked of the recovered state.
 */
inline RecoveredState recover(const CrashOutcome& crash, const SystemState& pre) {
  ReplayedMedia rm = replay_journal(crash.media, crash.txns);
  SystemState s;
  s.device.media.data = rm.data;
  s.device.media.ns_base = rm.ns;
  s.ns_mem = rm.ns;
  s.issued = pre.issued;
  s.next_inode = pre.next_inode;
  s.next_txn = pre.next_txn;
  s.trace = pre.trace;
  return RecoveredState{std::move(s), rm.inconsistencies};
}

}  // namespace persistcheck
