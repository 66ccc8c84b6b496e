// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <string>
#include <variant>
#include <vector>

#include "persistcheck/state.hpp"

namespace persistcheck {

// ---------------------------------------------------------------------------
// Fault opportunities
//
// F1: data page submission fails at the device.
// F2: journal block (log or commit record) write fails; the journal aborts
//     and the filesystem goes read-only.
// F3: device flush fails; cache and barrier epoch stay untouched.
// F4: power loss with an unflushed volatile cache. F4 is not an injector
//     decision; it is the crash plan handled by the fault engine.

enum class FaultPoint { F1_DataWrite, F2_JournalWrite, F3_Flush, F4_PowerLoss };

inline const char* to_string(FaultPoint p) {
  switch (p) {
    case FaultPoint::F1_DataWrite: return "F1";
    case FaultPoint::F2_JournalWrite: return "F2";
    case FaultPoint::F3_Flush: return "F3";
    case FaultPoint::F4_PowerLoss: return "F4";
  }
  return "?";
}

struct Opportunity {
  FaultPoint point = FaultPoint::F1_DataWrite;
  std::string site;  // canonical description, e.g. "data 2:0:v1"
  auto operator<=>(const Opportunity&) const = default;
};

// Supplies inject/pass decisions during a replay. The exploration engine
// backs this with a decision vector; a null injector never injects.
struct FaultInjector {
  virtual ~FaultInjector() = default;
  virtual bool decide(const Opportunity& op) = 0;
};

struct Event {
  LayerId layer = LayerId::Application;
  std::string what;
  std::string fault;  // non-empty when this event is an injected failure
  std::string digest;
  auto operator<=>(const Event&) const = default;
};

struct ExecContext {
  FsProfile profile;
  DeviceConfig device;
  bool fua_all_writes = false;  // every device write carries FUA
  FaultInjector* faults = nullptr;
  std::vector<Event>* events = nullptr;

  bool inject(FaultPoint p, const std::string& site) {
    if (!faults) return false;
    return faults->decide(Opportunity{p, site});
  }

  void log(const SystemState& s, LayerId layer, const std::string& what,
           const std::string& fault = "") {
    if (!events) return;
    events->push_back(Event{layer, what, fault, state_digest(s)});
  }
};

// ---------------------------------------------------------------------------
// Workload ops

struct OpCreate { std::string path; bool exclusive = true; };
struct OpWrite { std::string path; PageIndex index = 0; };
struct OpFsync { std::string path; bool retry = false; };
struct OpRename { std::string from, to; };
struct OpUnlink { std::string path; };
struct OpFsyncDir {};
struct OpRead { std::string path; };

using WorkloadOp =
    std::variant<OpCreate, OpWrite, OpFsync, OpRename, OpUnlink, OpFsyncDir, OpRead>;
using Workload = std::vector<WorkloadOp>;

inline std::string op_name(const WorkloadOp& op) {
  struct V {
    std::string operator()(const OpCreate&) const { return "create"; }
    std::string operator()(const OpWrite&) const { return "write"; }
    std::string operator()(const OpFsync& o) const { return o.retry ? "fsync-retry" : "fsync"; }
    std::string operator()(const OpRename&) const { return "rename"; }
    std::string operator()(const OpUnlink&) const { return "unlink"; }
    std::string operator()(const OpFsyncDir&) const { return "fsync-dir"; }
    std::string operator()(const OpRead&) const { return "read"; }
  };
  return std::visit(V{}, op);
}

// Pre-populated files: bound in the root directory both in memory and on
// media, content at initial version v0 (no explicit page entries needed).
inline SystemState make_initial_state(const std::vector<std::string>& files) {
  SystemState s;
  for (const std::string& name : files) {
    InodeId ino = s.next_inode++;
    s.ns_mem[DirEntryKey{kRootInode, name}] = ino;
    s.device.media.ns_base[DirEntryKey{kRootInode, name}] = ino;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Internals shared by the syscall transitions

namespace detail {

inline SystemState& record(ExecContext& ctx, SystemState& s, const std::string& name,
                           const std::string& res) {
  s.trace.push_back(TraceRecord{name, res});
  ctx.log(s, LayerId::Application, detail::cat(name, " -> ", res));
  return s;
}

inline JournalTxn& new_txn(SystemState& s, TxnScope scope, JournalMode mode,
                           InodeId file = 0) {
  JournalTxn t;
  t.id = s.next_txn++;
  t.scope = scope;
  t.mode = mode;
  t.file = file;
  s.txns.push_back(std::move(t));
  return s.txns.back();
}

// The transaction a metadata operation joins under the active journal mode:
// data=journal keeps one global running transaction, the other modes open a
// directory transaction per namespace op (committed by fsync-dir) and a file
// transaction per file (committed by fsync of that file).
inline JournalTxn& metadata_txn(SystemState& s, JournalMode mode, TxnScope scope,
                                InodeId file = 0) {
  if (mode == JournalMode::DataJournal) {
    if (JournalTxn* g = s.open_global_txn()) return *g;
    return new_txn(s, TxnScope::Global, mode);
  }
  if (scope == TxnScope::File) {
    if (JournalTxn* f = s.open_file_txn(file)) return *f;
    return new_txn(s, TxnScope::File, mode, file);
  }
  return new_txn(s, TxnScope::Directory, mode);
}

/**
 * Submit one dirty page during an fsync-path writeback. The dirty bit is
 * dropped at submission (per profile), before the outcome is known; a failed
 * write is not resubmitted unless the profile restores the dirty bit, and
 * btrfs-style profiles roll the in-memory content back to the prior on-disk
 * version. Ordered-mode commits record the attempt as covered data, which is
 * what lets recovery flag committed metadata whose data never arrived.
 */
inline bool submit_page(ExecContext& ctx, SystemState& s, InodeId file,
                        const PageKey& key, JournalTxn* covering_txn) {
  PageState& pg = s.pages.at(key);
  PageWrite pw{key, pg.version};
  bool fail = ctx.inject(FaultPoint::F1_DataWrite, detail::cat("data ", to_string(pw)));
  if (ctx.profile.clears_dirty_on_submit) pg.dirty = false;
  pg.submitted = true;
  if (fail) {
    if (ctx.profile.restores_dirty_on_failure) pg.dirty = true;
    bool reverted = false;
    if (ctx.profile.reverts_content_on_failure) {
      pg.version = replayed_media(s).page_content(key);
      pg.dirty = false;
      reverted = true;
    }
    s.wb_error.insert(file);
    if (covering_txn && ctx.profile.journal_mode == JournalMode::Ordered && !reverted)
      covering_txn->covered.push_back(pw);
    ctx.log(s, LayerId::BlockLayer, detail::cat("submit ", to_string(pw), " failed"),
            detail::cat("F1 data ", to_string(pw)));
    return false;
  }
  submit_write(s.device, ctx.device, BlockWrite{BlockKind::Data, pw, 0,
                                                ctx.fua_all_writes, 0});
  if (covering_txn && ctx.profile.journal_mode == JournalMode::Ordered)
    covering_txn->covered.push_back(pw);
  ctx.log(s, LayerId::BlockLayer, detail::cat("submit ", to_string(pw),
                                              ctx.fua_all_writes ? " (fua)" : ""));
  return true;
}

enum class CommitOutcome { Committed, FlushFailed, Aborted };

// Submit a journal block write with the profile's one-shot metadata retry.
inline bool journal_block_write(ExecContext& ctx, SystemState& s, BlockKind kind,
                                const JournalTxn& t, bool fua) {
  std::string site = detail::cat(to_string(kind), " txn", t.id);
  bool fail = ctx.inject(FaultPoint::F2_JournalWrite, site);
  if (fail && ctx.profile.retries_metadata) {
    ctx.log(s, LayerId::FilesystemJournal, detail::cat(site, " failed, requeued"),
            detail::cat("F2 ", site));
    fail = ctx.inject(FaultPoint::F2_JournalWrite, site + " retry");
  }
  if (fail) {
    s.health = FsHealth::AbortedReadOnly;
    ctx.log(s, LayerId::FilesystemJournal,
            detail::cat(site, " failed, journal aborted, filesystem read-only"),
            detail::cat("F2 ", site));
    return false;
  }
  submit_write(s.device, ctx.device, BlockWrite{kind, {}, t.id, fua, 0});
  ctx.log(s, LayerId::FilesystemJournal, detail::cat("wrote ", site, fua ? " (fua)" : ""));
  return true;
}

/**
 * Drive one transaction through logged -> commit-record-written. Ordered and
 * data=journal commits flush before the commit record (the barrier that makes
 * "record on media" imply "covered data on media"); writeback commits do not,
 * which is exactly the metadata/data reordering writeback permits. The commit
 * record is written FUA when the device supports it.
 */
inline CommitOutcome commit_txn(ExecContext& ctx, SystemState& s, TxnId id) {
  auto find = [&]() -> JournalTxn& {
    for (auto& t : s.txns)
      if (t.id == id) return t;
    throw std::logic_error("commit_txn: unknown txn");
  };
  JournalMode mode = ctx.profile.journal_mode;
  if (find().phase == TxnPhase::Open) {
    if (!journal_block_write(ctx, s, BlockKind::JournalLog, find(), ctx.fua_all_writes))
      return CommitOutcome::Aborted;
    JournalTxn& t = find();
    t.phase = TxnPhase::Logged;
    if (mode == JournalMode::DataJournal) {
      // Data rides the log blocks; the home-location pages stop being dirty
      // once the journal holds a replayable copy.
      for (const PageWrite& w : t.journaled_data) {
        auto it = s.pages.find(w.page);
        if (it != s.pages.end() && it->second.version == w.version) {
          it->second.dirty = false;
          it->second.submitted = true;
        }
      }
    }
  }
  if (mode != JournalMode::Writeback) {
    std::string site = detail::cat("flush pre txn", id);
    if (ctx.inject(FaultPoint::F3_Flush, site)) {
      ctx.log(s, LayerId::ControllerCache, "pre-commit flush failed",
              detail::cat("F3 ", site));
      return CommitOutcome::FlushFailed;
    }
    issue_flush(s.device, ctx.device);
    ctx.log(s, LayerId::ControllerCache, "pre-commit flush");
  }
  if (!journal_block_write(ctx, s, BlockKind::JournalCommit, find(),
                           ctx.device.fua_supported || ctx.fua_all_writes))
    return CommitOutcome::Aborted;
  find().phase = TxnPhase::CommitRecordWritten;
  return CommitOutcome::Committed;
}

// Report step shared by fsync and fsync-dir: one EIO per error episode, flag
// cleared after the first report so an immediate retry reports success.
inline SystemState& fsync_report(ExecContext& ctx, SystemState& s, const std::string& name,
                                 InodeId file, bool err) {
  if (err || s.wb_error.count(file)) {
    if (ctx.profile.error_flag_cleared_after_first_report) s.wb_error.erase(file);
    ctx.log(s, LayerId::PageCache, detail::cat("error flag reported and cleared, inode ", file));
    return record(ctx, s, name, "EIO");
  }
  return record(ctx, s, name, "ok");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Syscalls. Each takes the state by value, applies one transition, appends
// exactly one record to the observable trace and returns the new state.

inline SystemState sys_create(ExecContext& ctx, SystemState s, const std::string& path,
                              bool exclusive = true) {
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, "create", "EROFS");
  if (s.resolve(path)) {
    if (exclusive) return detail::record(ctx, s, "create", "EEXIST");
    return detail::record(ctx, s, "create", "ok");  // plain open of existing
  }
  InodeId ino = s.next_inode++;
  DirEntryKey entry{kRootInode, path};
  s.ns_mem[entry] = ino;
  JournalTxn& t = detail::metadata_txn(s, ctx.profile.journal_mode, TxnScope::Directory);
  t.ns_ops.push_back(NsOp{entry, ino});
  t.touched.insert(ino);
  ctx.log(s, LayerId::PageCache, detail::cat("bind ", path, " -> inode ", ino,
                                             " (txn ", t.id, ")"));
  return detail::record(ctx, s, "create", "ok");
}

inline SystemState sys_write(ExecContext& ctx, SystemState s, const std::string& path,
                             PageIndex index = 0) {
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, "write", "EROFS");
  auto ino = s.resolve(path);
  if (!ino) return detail::record(ctx, s, "write", "ENOENT");
  PageKey key{*ino, index};
  ContentVersion v{++s.issued[key]};
  s.pages[key] = PageState{v, true, false};
  JournalMode mode = ctx.profile.journal_mode;
  if (mode == JournalMode::DataJournal) {
    JournalTxn& t = detail::metadata_txn(s, mode, TxnScope::Global);
    t.journaled_data.push_back(PageWrite{key, v});
    t.touched.insert(*ino);
  } else {
    // Size/mtime/allocation updates pend in the file's metadata transaction.
    JournalTxn& t = detail::metadata_txn(s, mode, TxnScope::File, *ino);
    t.touched.insert(*ino);
  }
  ctx.log(s, LayerId::PageCache, detail::cat("page ", to_string(PageWrite{key, v}),
                                             " dirty"));
  return detail::record(ctx, s, "write", "ok");
}

inline SystemState sys_unlink(ExecContext& ctx, SystemState s, const std::string& path) {
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, "unlink", "EROFS");
  auto ino = s.resolve(path);
  if (!ino) return detail::record(ctx, s, "unlink", "ENOENT");
  DirEntryKey entry{kRootInode, path};
  s.ns_mem.erase(entry);
  JournalTxn& t = detail::metadata_txn(s, ctx.profile.journal_mode, TxnScope::Directory);
  t.ns_ops.push_back(NsOp{entry, std::nullopt});
  t.touched.insert(*ino);
  // Data pages of the unlinked inode persist until checkpoint; no media effect.
  ctx.log(s, LayerId::PageCache, detail::cat("unbind ", path, " (txn ", t.id, ")"));
  return detail::record(ctx, s, "unlink", "ok");
}

// Atomic within each view: no intermediate state binds both or neither name.
inline SystemState sys_rename(ExecContext& ctx, SystemState s, const std::string& from,
                              const std::string& to) {
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, "rename", "EROFS");
  auto ino = s.resolve(from);
  if (!ino) return detail::record(ctx, s, "rename", "ENOENT");
  DirEntryKey efrom{kRootInode, from}, eto{kRootInode, to};
  s.ns_mem.erase(efrom);
  s.ns_mem[eto] = *ino;  // silently replaces any existing target binding
  JournalTxn& t = detail::metadata_txn(s, ctx.profile.journal_mode, TxnScope::Directory);
  t.ns_ops.push_back(NsOp{efrom, std::nullopt});
  t.ns_ops.push_back(NsOp{eto, *ino});
  t.touched.insert(*ino);
  ctx.log(s, LayerId::PageCache,
          detail::cat("rebind ", from, " -> ", to, " (inode ", *ino, ", txn ", t.id, ")"));
  return detail::record(ctx, s, "rename", "ok");
}

/**
 * fsync(file): submit the file's dirty pages, commit the transaction covering
 * the file's metadata, and flush. The return value reports the current error
 * episode and then clears it; it does not promise the write-set is on media,
 * and the checks that quantify over fault schedules exploit exactly that gap.
 *
 * Directory bindings are NOT committed here: a created or renamed entry needs
 * an fsync of the parent directory. data=journal commits the global
 * transaction, so everything batched so far becomes durable together.
 */
inline SystemState sys_fsync(ExecContext& ctx, SystemState s, const std::string& path,
                             bool retry = false) {
  (void)retry;  // a retry is the same syscall; it differs only in intent
  const std::string name = "fsync";
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, name, "EROFS");
  auto ino = s.resolve(path);
  if (!ino) return detail::record(ctx, s, name, "ENOENT");
  InodeId f = *ino;
  JournalMode mode = ctx.profile.journal_mode;
  bool err = false;

  // Find the pending transaction first (file scope, or the global one).
  TxnId pending = 0;
  for (auto& t : s.txns) {
    bool match = mode == JournalMode::DataJournal
                     ? t.scope == TxnScope::Global
                     : (t.scope == TxnScope::File && t.file == f);
    if (match && (t.phase == TxnPhase::Open || t.phase == TxnPhase::Logged)) pending = t.id;
  }

  if (mode != JournalMode::DataJournal) {
    std::vector<PageKey> dirty;
    for (const auto& [k, p] : s.pages)
      if (k.file == f && p.dirty) dirty.push_back(k);
    for (const PageKey& k : dirty) {
      JournalTxn* cover = nullptr;
      for (auto& t : s.txns)
        if (t.id == pending) cover = &t;
      if (!detail::submit_page(ctx, s, f, k, cover)) err = true;
    }
  }

  bool sealed_by_fua = false;
  if (pending) {
    switch (detail::commit_txn(ctx, s, pending)) {
      case detail::CommitOutcome::Aborted:
        return detail::record(ctx, s, name, "EIO");
      case detail::CommitOutcome::FlushFailed:
        s.wb_error.insert(f);
        err = true;
        break;
      case detail::CommitOutcome::Committed:
        sealed_by_fua = (ctx.device.fua_supported || ctx.fua_all_writes) &&
                        mode != JournalMode::Writeback;
        break;
    }
  }

  // Durability barrier for the data (and the commit record when not FUA).
  // Skipped when an ordered/journal commit already sealed everything: data
  // went to media under the pre-commit flush and the record was FUA.
  if (!err && !sealed_by_fua) {
    if (ctx.inject(FaultPoint::F3_Flush, "flush post")) {
      ctx.log(s, LayerId::ControllerCache, "post flush failed", "F3 flush post");
      s.wb_error.insert(f);
      err = true;
    } else {
      issue_flush(s.device, ctx.device);
      ctx.log(s, LayerId::ControllerCache, "post flush");
    }
  }
  return detail::fsync_report(ctx, s, name, f, err);
}

/**
 * fsync of the parent directory: commits pending directory transactions in
 * log order. Ordered mode writes back dirty data of each transaction's
 * touched files first, so a binding that reaches media never references
 * content the barrier should have pushed ahead of it.
 */
inline SystemState sys_fsync_dir(ExecContext& ctx, SystemState s) {
  const std::string name = "fsync-dir";
  if (s.health != FsHealth::Normal) return detail::record(ctx, s, name, "EROFS");
  JournalMode mode = ctx.profile.journal_mode;
  std::vector<TxnId> pending;
  for (const auto& t : s.txns) {
    bool match = mode == JournalMode::DataJournal ? t.scope == TxnScope::Global
                                                  : t.scope == TxnScope::Directory;
    if (match && (t.phase == TxnPhase::Open || t.phase == TxnPhase::Logged))
      pending.push_back(t.id);
  }
  if (pending.empty()) return detail::record(ctx, s, name, "ok");

  bool err = false;
  bool sealed_by_fua = false;
  for (TxnId id : pending) {
    if (mode == JournalMode::Ordered) {
      std::set<InodeId> touched;
      for (const auto& t : s.txns)
        if (t.id == id) touched = t.touched;
      for (InodeId f : touched) {
        std::vector<PageKey> dirty;
        for (const auto& [k, p] : s.pages)
          if (k.file == f && p.dirty) dirty.push_back(k);
        for (const PageKey& k : dirty) {
          JournalTxn* cover = nullptr;
          for (auto& t : s.txns)
            if (t.id == id) cover = &t;
          if (!detail::submit_page(ctx, s, f, k, cover)) err = true;
        }
      }
    }
    auto outcome = detail::commit_txn(ctx, s, id);
    if (outcome == detail::CommitOutcome::Aborted) return detail::record(ctx, s, name, "EIO");
    if (outcome == detail::CommitOutcome::FlushFailed) {
      err = true;
      break;
    }
    sealed_by_fua = (ctx.device.fua_supported || ctx.fua_all_writes) &&
                    mode != JournalMode::Writeback;
  }
  if (!err && !sealed_by_fua) {
    if (ctx.inject(FaultPoint::F3_Flush, "flush post")) {
      ctx.log(s, LayerId::ControllerCache, "post flush failed", "F3 flush post");
      err = true;
    } else {
      issue_flush(s.device, ctx.device);
      ctx.log(s, LayerId::ControllerCache, "post flush");
    }
  }
  if (err) return detail::record(ctx, s, name, "EIO");
  return detail::record(ctx, s, name, "ok");
}

struct ReadResult {
  SystemState state;
  std::optional<ContentVersion> content;  // nullopt: path absent
};

// Reads resolve through the page cache when an entry exists, else through
// media as the journal replay would leave it. After crash recovery the cache
// is cold, so reads surface whatever the replayed media holds, including the
// v0 content writeback mode can expose under a committed binding.
inline ReadResult sys_read(ExecContext& ctx, SystemState s, const std::string& path) {
  auto ino = s.resolve(path);
  if (!ino) {
    detail::record(ctx, s, "read", "ENOENT");
    return ReadResult{std::move(s), std::nullopt};
  }
  PageKey key{*ino, 0};
  ContentVersion v;
  auto it = s.pages.find(key);
  if (it != s.pages.end()) v = it->second.version;
  else v = replayed_media(s).page_content(key);
  detail::record(ctx, s, "read", "ok");
  return ReadResult{std::move(s), v};
}

inline SystemState apply_op(ExecContext& ctx, SystemState s, const WorkloadOp& op) {
  struct V {
    ExecContext& ctx;
    SystemState s;
    SystemState operator()(const OpCreate& o) {
      return sys_create(ctx, std::move(s), o.path, o.exclusive);
    }
    SystemState operator()(const OpWrite& o) {
      return sys_write(ctx, std::move(s), o.path, o.index);
    }
    SystemState operator()(const OpFsync& o) {
      return sys_fsync(ctx, std::move(s), o.path, o.retry);
    }
    SystemState operator()(const OpRename& o) {
      return sys_rename(ctx, std::move(s), o.from, o.to);
    }
    SystemState operator()(const OpUnlink& o) {
      return sys_unlink(ctx, std::move(s), o.path);
    }
    SystemState operator()(const OpFsyncDir&) { return sys_fsync_dir(ctx, std::move(s)); }
    SystemState operator()(const OpRead& o) {
      return sys_read(ctx, std::move(s), o.path).state;
    }
  };
  return std::visit(V{ctx, std::move(s)}, op);
}

// The final data version each page would hold if the whole workload took
// effect: the default write-set for scenario-level durability questions.
inline WriteSet default_write_set(const SystemState& initial, const Workload& ops) {
  SystemState s = initial;
  std::map<PageKey, ContentVersion> last;
  for (const WorkloadOp& op : ops) {
    if (const OpCreate* c = std::get_if<OpCreate>(&op)) {
      if (!s.resolve(c->path)) s.ns_mem[DirEntryKey{kRootInode, c->path}] = s.next_inode++;
    } else if (const OpWrite* w = std::get_if<OpWrite>(&op)) {
      if (auto ino = s.resolve(w->path)) {
        PageKey key{*ino, w->index};
        last[key] = ContentVersion{++s.issued[key]};
      }
    } else if (const OpRename* r = std::get_if<OpRename>(&op)) {
      if (auto ino = s.resolve(r->from)) {
        s.ns_mem.erase(DirEntryKey{kRootInode, r->from});
        s.ns_mem[DirEntryKey{kRootInode, r->to}] = *ino;
      }
    } else if (const OpUnlink* u = std::get_if<OpUnlink>(&op)) {
      auto it = s.ns_mem.find(DirEntryKey{kRootInode, u->path});
      if (it != s.ns_mem.end()) s.ns_mem.erase(it);
    }
  }
  WriteSet ws;
  for (const auto& [k, v] : last) ws.pages.push_back(PageWrite{k, v});
  return ws;
}

}  // namespace persistcheck
