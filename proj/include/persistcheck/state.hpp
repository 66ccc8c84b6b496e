// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "persistcheck/device.hpp"
#include "persistcheck/profiles.hpp"
#include "persistcheck/types.hpp"

namespace persistcheck {

// ---------------------------------------------------------------------------
// Journal

enum class TxnPhase { Open, Logged, CommitRecordWritten, Checkpointed };

inline const char* to_string(TxnPhase p) {
  switch (p) {
    case TxnPhase::Open: return "open";
    case TxnPhase::Logged: return "logged";
    case TxnPhase::CommitRecordWritten: return "commit-record-written";
    case TxnPhase::Checkpointed: return "checkpointed";
  }
  return "?";
}

// File transactions carry one file's inode metadata and are committed by
// fsync(file). Directory transactions carry binding changes and are committed
// by fsync of the parent directory. data=journal collapses everything into
// one global running transaction, which is what makes it all-or-nothing.
enum class TxnScope { File, Directory, Global };

// One namespace binding change; nullopt target removes the entry.
struct NsOp {
  DirEntryKey entry;
  std::optional<InodeId> bind;
  auto operator<=>(const NsOp&) const = default;
};

struct JournalTxn {
  TxnId id = 0;
  TxnPhase phase = TxnPhase::Open;
  TxnScope scope = TxnScope::File;
  JournalMode mode = JournalMode::Ordered;
  InodeId file = 0;  // File scope only
  std::vector<NsOp> ns_ops;
  std::vector<PageWrite> journaled_data;  // data=journal payload, applied at replay
  std::vector<PageWrite> covered;  // data ordered before this txn's commit record
  std::set<InodeId> touched;       // inodes this txn's metadata refers to
  auto operator<=>(const JournalTxn&) const = default;

  bool committed() const { return phase >= TxnPhase::CommitRecordWritten; }
};

// ---------------------------------------------------------------------------
// Page cache

struct PageState {
  ContentVersion version;
  bool dirty = false;
  bool submitted = false;  // handed to the block layer at least once
  auto operator<=>(const PageState&) const = default;
};

// ---------------------------------------------------------------------------
// Observable trace

struct TraceRecord {
  std::string syscall;
  std::string result;  // ok | EIO | EROFS | ENOENT | EEXIST
  auto operator<=>(const TraceRecord&) const = default;
};

inline std::string to_string(const TraceRecord& r) {
  return detail::cat("(", r.syscall, ", ", r.result, ")");
}

enum class FsHealth { Normal, AbortedReadOnly };

// ---------------------------------------------------------------------------
// System state

/**
 * Complete state of the six-layer stack as an immutable value. Transitions
 * copy the state; nothing here owns resources or shares mutable data, so
 * exploration may fan states out across threads freely.
 *
 * Layer mapping: `issued`/`next_inode` are the application layer's knowledge;
 * `pages`, `ns_mem`, `health` and `wb_error` are the page cache / in-memory
 * filesystem; `txns` is the filesystem journal; the block layer completes
 * synchronously and holds nothing between steps; `device.cache` is the
 * controller cache and `device.media` the persistent media.
 */
struct SystemState {
  // application
  std::map<PageKey, std::uint32_t> issued;  // newest generation written per page
  InodeId next_inode = kRootInode + 1;

  // page cache and in-memory filesystem
  std::map<PageKey, PageState> pages;
  std::map<DirEntryKey, InodeId> ns_mem;
  FsHealth health = FsHealth::Normal;
  std::set<InodeId> wb_error;  // files with an unreported writeback error

  // journal
  std::vector<JournalTxn> txns;  // ascending id
  TxnId next_txn = 1;

  // device
  DeviceState device;

  // observable
  std::vector<TraceRecord> trace;

  auto operator<=>(const SystemState&) const = default;

  std::optional<InodeId> resolve(const std::string& name) const {
    auto it = ns_mem.find(DirEntryKey{kRootInode, name});
    if (it == ns_mem.end()) return std::nullopt;
    return it->second;
  }

  const JournalTxn* txn_by_id(TxnId id) const {
    for (const auto& t : txns)
      if (t.id == id) return &t;
    return nullptr;
  }

  // The open transaction new metadata for `file` joins, if any.
  JournalTxn* open_file_txn(InodeId file) {
    for (auto& t : txns)
      if (t.scope == TxnScope::File && t.file == file && t.phase == TxnPhase::Open)
        return &t;
    return nullptr;
  }

  JournalTxn* open_global_txn() {
    for (auto& t : txns)
      if (t.scope == TxnScope::Global && t.phase == TxnPhase::Open) return &t;
    return nullptr;
  }
};

inline const std::vector<TraceRecord>& observable_trace(const SystemState& s) {
  return s.trace;
}

inline std::string trace_to_string(const std::vector<TraceRecord>& t) {
  std::string out = "[";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ", ";
    out += to_string(t[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// Canonical serialization (digests, deduplication, determinism)

inline std::string to_canonical_string(const MediaState& m) {
  std::ostringstream os;
  os << "data{";
  for (const auto& [k, v] : m.data) os << k.file << ":" << k.index << "=v" << v.gen << ";";
  os << "}ns{";
  for (const auto& [k, v] : m.ns_base) os << k.dir << "/" << k.name << "=" << v << ";";
  os << "}log{";
  for (TxnId t : m.log_blocks) os << t << ";";
  os << "}rec{";
  for (TxnId t : m.commit_records) os << t << ";";
  os << "}";
  return os.str();
}

inline std::string to_canonical_string(const SystemState& s) {
  std::ostringstream os;
  os << "pages{";
  for (const auto& [k, p] : s.pages)
    os << k.file << ":" << k.index << "=v" << p.version.gen << (p.dirty ? "d" : "")
       << (p.submitted ? "s" : "") << ";";
  os << "}ns{";
  for (const auto& [k, v] : s.ns_mem) os << k.dir << "/" << k.name << "=" << v << ";";
  os << "}health:" << (s.health == FsHealth::Normal ? "ok" : "ro") << ";err{";
  for (InodeId f : s.wb_error) os << f << ";";
  os << "}txns{";
  for (const auto& t : s.txns) {
    os << t.id << ":" << to_string(t.phase) << ":";
    for (const auto& op : t.ns_ops) {
      os << op.entry.dir << "/" << op.entry.name << "->";
      if (op.bind) os << *op.bind;
      else os << "x";
      os << ",";
    }
    for (const auto& w : t.journaled_data) os << "j" << to_string(w) << ",";
    for (const auto& w : t.covered) os << "c" << to_string(w) << ",";
    os << ";";
  }
  os << "}cache{";
  for (const auto& w : s.device.cache) os << to_string(w) << ";";
  os << "}epoch:" << s.device.barrier_epoch << ";media:" << to_canonical_string(s.device.media);
  os << ";trace:" << trace_to_string(s.trace);
  return os.str();
}

inline std::string state_digest(const SystemState& s) {
  return hex_digest(fnv1a(to_canonical_string(s)));
}

// ---------------------------------------------------------------------------
// Journal replay (shared by the durability predicates and crash recovery)

struct ReplayedMedia {
  std::map<PageKey, ContentVersion> data;
  std::map<DirEntryKey, InodeId> ns;
  std::vector<std::string> inconsistencies;

  ContentVersion page_content(const PageKey& k) const {
    auto it = data.find(k);
    return it == data.end() ? kInitialContent : it->second;
  }
};

/**
 * Effective media contents once the journal is honored: every transaction
 * whose log blocks and commit record are evidenced on media replays, in log
 * order. Replay applies namespace ops and data=journal payloads; it never
 * repairs. An ordered-mode transaction that covered data the media does not
 * hold is flagged as structurally inconsistent (committed metadata pointing
 * at content that never arrived), mirroring post-failure filesystem states
 * where inodes reference blocks whose writes were dropped.
 */
inline ReplayedMedia replay_journal(const MediaState& m,
                                    const std::vector<JournalTxn>& txns) {
  ReplayedMedia out;
  out.data = m.data;
  out.ns = m.ns_base;
  for (const JournalTxn& t : txns) {  // txns kept in ascending id order
    if (!m.commit_records.count(t.id) || !m.log_blocks.count(t.id)) continue;
    for (const PageWrite& w : t.journaled_data) out.data[w.page] = w.version;
    for (const NsOp& op : t.ns_ops) {
      if (op.bind) out.ns[op.entry] = *op.bind;
      else out.ns.erase(op.entry);
    }
    for (const PageWrite& w : t.covered) {
      auto it = out.data.find(w.page);
      ContentVersion have = it == out.data.end() ? kInitialContent : it->second;
      if (have < w.version) {
        out.inconsistencies.push_back(
            detail::cat("txn ", t.id, " committed expecting ", to_string(w),
                        " on media, found v", have.gen));
      }
    }
  }
  return out;
}

inline ReplayedMedia replayed_media(const SystemState& s) {
  return replay_journal(s.device.media, s.txns);
}

// ---------------------------------------------------------------------------
// Per-layer convergence and durability

namespace detail {

// Rejects write-sets that no run of the workload could ever satisfy. Called
// against the final state of a fault-free run, not per step: mid-run the set
// is legitimately not yet issued.
inline void validate_write_set(const SystemState& s, const WriteSet& ws) {
  for (const PageWrite& w : ws.pages) {
    auto it = s.issued.find(w.page);
    std::uint32_t newest = it == s.issued.end() ? 0 : it->second;
    if (w.version.gen == 0 || w.version.gen > newest)
      throw ConfigError(detail::cat("write-set member ", to_string(w),
                                    " was never issued by the application"));
  }
  for (const BindingExpect& b : ws.bindings) {
    if (b.target && *b.target >= s.next_inode)
      throw ConfigError(detail::cat("write-set binding targets unknown inode ", *b.target));
  }
}

// Does this transaction's fate decide the given binding expectation?
inline bool txn_carries_binding(const JournalTxn& t, const BindingExpect& b) {
  for (const NsOp& op : t.ns_ops)
    if (op.entry == b.entry) return true;
  return false;
}

inline bool txn_carries_page(const JournalTxn& t, const PageWrite& w) {
  for (const PageWrite& j : t.journaled_data)
    if (j.page == w.page && j.version == w.version) return true;
  return false;
}

}  // namespace detail

/**
 * True iff no effect of the write-set is still pending at `layer`: everything
 * the set names has propagated strictly downstream of it. Durability is the
 * conjunction over all six layers; a clean page cache says nothing about the
 * layers below, which is the whole point of checking them separately.
 */
inline bool layer_committed(const SystemState& s, LayerId layer, const WriteSet& ws) {
  switch (layer) {
    case LayerId::Application: {
      // Issued and handed down: each page write has been made by the
      // application and each binding holds in the in-memory namespace.
      for (const PageWrite& w : ws.pages) {
        auto it = s.issued.find(w.page);
        std::uint32_t newest = it == s.issued.end() ? 0 : it->second;
        if (w.version.gen > newest) return false;
      }
      for (const BindingExpect& b : ws.bindings) {
        auto it = s.ns_mem.find(b.entry);
        std::optional<InodeId> have =
            it == s.ns_mem.end() ? std::nullopt : std::optional<InodeId>(it->second);
        if (have != b.target) return false;
      }
      return true;
    }

    case LayerId::PageCache: {
      for (const PageWrite& w : ws.pages) {
        auto it = s.pages.find(w.page);
        if (it != s.pages.end() && it->second.dirty && it->second.version == w.version)
          return false;
      }
      return true;
    }

    case LayerId::FilesystemJournal: {
      for (const JournalTxn& t : s.txns) {
        if (t.committed()) continue;
        for (const PageWrite& w : ws.pages)
          if (detail::txn_carries_page(t, w)) return false;
        for (const BindingExpect& b : ws.bindings)
          if (detail::txn_carries_binding(t, b)) return false;
      }
      return true;
    }

    case LayerId::BlockLayer:
      // Submissions complete synchronously; nothing queues between steps.
      return true;

    case LayerId::ControllerCache: {
      for (const BlockWrite& cw : s.device.cache) {
        switch (cw.kind) {
          case BlockKind::Data:
            for (const PageWrite& w : ws.pages)
              if (cw.data.page == w.page && cw.data.version == w.version) return false;
            break;
          case BlockKind::JournalLog:
          case BlockKind::JournalCommit: {
            const JournalTxn* t = s.txn_by_id(cw.txn);
            if (!t) break;
            for (const PageWrite& w : ws.pages)
              if (detail::txn_carries_page(*t, w)) return false;
            for (const BindingExpect& b : ws.bindings)
              if (detail::txn_carries_binding(*t, b)) return false;
            break;
          }
        }
      }
      return true;
    }

    case LayerId::PersistentMedia: {
      ReplayedMedia rm = replayed_media(s);
      for (const PageWrite& w : ws.pages)
        if (rm.page_content(w.page) < w.version) return false;
      for (const BindingExpect& b : ws.bindings) {
        auto it = rm.ns.find(b.entry);
        std::optional<InodeId> have =
            it == rm.ns.end() ? std::nullopt : std::optional<InodeId>(it->second);
        if (have != b.target) return false;
      }
      return true;
    }
  }
  return false;
}

/**
 * Data durability: the write-set has converged through all six layers, i.e.
 * its versions (and any explicitly named bindings) are on persistent media or
 * evidenced by a replayable journal record on media. Note what this does not
 * say: a clean page cache, a successful syscall, or an error-free trace.
 */
inline bool durable(const SystemState& s, const WriteSet& ws) {
  for (LayerId l : kAllLayers)
    if (!layer_committed(s, l, ws)) return false;
  return true;
}

/**
 * Reachable durability additionally requires each page's file to be reachable
 * through the post-recovery namespace. A file whose data is on media but
 * whose creating binding was never persisted is data-durable yet unreachable.
 */
inline bool reachable_durable(const SystemState& s, const WriteSet& ws) {
  if (!durable(s, ws)) return false;
  ReplayedMedia rm = replayed_media(s);
  for (const PageWrite& w : ws.pages) {
    bool bound = false;
    for (const auto& [entry, inode] : rm.ns) {
      if (inode == w.page.file) {
        bound = true;
        break;
      }
    }
    if (!bound) return false;
  }
  return true;
}

// All write-set pages clean in the page cache (absent entries count as clean).
inline bool write_set_clean(const SystemState& s, const WriteSet& ws) {
  for (const PageWrite& w : ws.pages) {
    auto it = s.pages.find(w.page);
    if (it != s.pages.end() && it->second.dirty) return false;
  }
  return true;
}

// All write-set versions already written by the application. Distinguishes a
// page writeback cleaned from one that was never dirtied in the first place.
inline bool write_set_issued(const SystemState& s, const WriteSet& ws) {
  for (const PageWrite& w : ws.pages) {
    auto it = s.issued.find(w.page);
    std::uint32_t newest = it == s.issued.end() ? 0 : it->second;
    if (w.version.gen > newest) return false;
  }
  return true;
}

}  // namespace persistcheck
