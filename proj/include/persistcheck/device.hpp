// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "persistcheck/types.hpp"

namespace persistcheck {

/**
 * Storage device configuration. The four fields answer the four questions an
 * application would have to ask to reason about flush semantics: is there a
 * volatile write cache, is it enabled, does the interface support
 * force-unit-access writes, and does the device have power-loss protection.
 * plp=true means the cache is non-volatile regardless of the other answers.
 */
struct DeviceConfig {
  bool volatile_cache_present = true;
  bool volatile_cache_enabled = true;
  bool fua_supported = false;
  bool plp = false;

  void validate() const {
    if (volatile_cache_enabled && !volatile_cache_present)
      throw ConfigError("device: volatile_cache_enabled requires volatile_cache_present");
  }

  // True when an acknowledged non-FUA write can still be lost on power loss.
  bool effectively_volatile() const {
    return volatile_cache_present && volatile_cache_enabled && !plp;
  }
};

enum class BlockKind { Data, JournalLog, JournalCommit };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Data: return "data";
    case BlockKind::JournalLog: return "journal-log";
    case BlockKind::JournalCommit: return "journal-commit";
  }
  return "?";
}

struct BlockWrite {
  BlockKind kind = BlockKind::Data;
  PageWrite data;   // meaningful for kind == Data
  TxnId txn = 0;    // meaningful for journal kinds
  bool fua = false;
  std::uint32_t epoch = 0;  // completed flushes preceding submission
  auto operator<=>(const BlockWrite&) const = default;
};

inline std::string to_string(const BlockWrite& w) {
  if (w.kind == BlockKind::Data)
    return detail::cat("data ", to_string(w.data), w.fua ? " fua" : "");
  return detail::cat(to_string(w.kind), " txn", w.txn, w.fua ? " fua" : "");
}

/**
 * What is on stable media: page contents (absent page = initial content v0),
 * the checkpointed namespace, and journal block evidence. Recovery reads the
 * evidence sets to decide which transactions replay.
 */
struct MediaState {
  std::map<PageKey, ContentVersion> data;
  std::map<DirEntryKey, InodeId> ns_base;
  std::set<TxnId> log_blocks;
  std::set<TxnId> commit_records;
  auto operator<=>(const MediaState&) const = default;

  ContentVersion page_content(const PageKey& k) const {
    auto it = data.find(k);
    return it == data.end() ? kInitialContent : it->second;
  }
};

struct DeviceState {
  MediaState media;
  std::vector<BlockWrite> cache;  // volatile cache, submission order
  std::uint32_t barrier_epoch = 0;
  auto operator<=>(const DeviceState&) const = default;
};

inline void apply_to_media(MediaState& m, const BlockWrite& w) {
  switch (w.kind) {
    case BlockKind::Data:
      m.data[w.data.page] = w.data.version;
      break;
    case BlockKind::JournalLog:
      m.log_blocks.insert(w.txn);
      break;
    case BlockKind::JournalCommit:
      m.commit_records.insert(w.txn);
      break;
  }
}

/**
 * Submit one block write. Completion is synchronous: an accepted write lands
 * on media directly (FUA, or no effectively volatile cache) or in the cache.
 * An injected failure drops the write entirely; the caller sees the error and
 * owns any dirty-state bookkeeping.
 */
inline bool submit_write(DeviceState& dev, const DeviceConfig& cfg, BlockWrite w,
                         bool inject_failure = false) {
  if (inject_failure) return false;
  w.epoch = dev.barrier_epoch;
  if (w.fua || !cfg.effectively_volatile()) {
    apply_to_media(dev.media, w);
  } else {
    dev.cache.push_back(w);
  }
  return true;
}

/**
 * Device flush. With an effectively volatile cache, applies every cached
 * write to media in submission order. Without one it is a conditional no-op
 * that still succeeds: the barrier epoch advances so ordering survives even
 * when the flush has nothing to move. An injected failure leaves the cache
 * and the epoch untouched.
 */
inline bool issue_flush(DeviceState& dev, const DeviceConfig& cfg,
                        bool inject_failure = false) {
  if (inject_failure) return false;
  if (cfg.effectively_volatile()) {
    for (const BlockWrite& w : dev.cache) apply_to_media(dev.media, w);
    dev.cache.clear();
  }
  dev.barrier_epoch += 1;
  return true;
}

// Number of distinct post-power-loss media states of this device state.
inline std::size_t power_loss_state_count(const DeviceState& dev,
                                          const DeviceConfig& cfg) {
  if (!cfg.effectively_volatile()) return 1;
  return std::size_t{1} << dev.cache.size();
}

/**
 * Media contents after power loss, keeping the cache subset selected by
 * `subset_mask` (bit i = cache[i] reached media before the cut). Every
 * successful flush drains the whole cache, so all cache-resident writes share
 * the current epoch and any subset is a legal outcome. A non-volatile cache
 * (PLP, or no cache at all) loses nothing: the mask is forced to "all".
 */
inline MediaState power_loss(const DeviceState& dev, const DeviceConfig& cfg,
                             std::uint64_t subset_mask) {
  MediaState m = dev.media;
  const bool lossy = cfg.effectively_volatile();
  for (std::size_t i = 0; i < dev.cache.size(); ++i) {
    if (!lossy || (subset_mask >> i) & 1) apply_to_media(m, dev.cache[i]);
  }
  return m;
}

// The first three of the four device questions; the fourth (is the
// post-failure state well-defined) needs the model checker and lives there.
inline bool verify_q1_cache_present(const DeviceConfig& c) { return c.volatile_cache_present; }
inline bool verify_q2_cache_enabled(const DeviceConfig& c) {
  return c.volatile_cache_present && c.volatile_cache_enabled;
}
inline bool verify_q3_fua_supported(const DeviceConfig& c) { return c.fua_supported; }

}  // namespace persistcheck
