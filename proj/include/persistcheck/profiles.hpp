// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <string>

#include "persistcheck/types.hpp"

namespace persistcheck {

enum class JournalMode { Ordered, Writeback, DataJournal };

inline const char* to_string(JournalMode m) {
  switch (m) {
    case JournalMode::Ordered: return "ordered";
    case JournalMode::Writeback: return "writeback";
    case JournalMode::DataJournal: return "data-journal";
  }
  return "?";
}

inline JournalMode journal_mode_from_string(const std::string& s) {
  if (s == "ordered") return JournalMode::Ordered;
  if (s == "writeback") return JournalMode::Writeback;
  if (s == "data-journal" || s == "journal") return JournalMode::DataJournal;
  throw ConfigError("unknown journal mode: " + s);
}

/**
 * Failure-semantics knobs that distinguish filesystems. The flags encode what
 * each implementation does when a data page submission fails:
 *
 *   clears_dirty_on_submit        dirty bit dropped when the page is handed to
 *                                 the block layer (before completion is known)
 *   restores_dirty_on_failure     failed pages become dirty again, so a retry
 *                                 resubmits them (no mainstream fs does this;
 *                                 the "restore-dirty" control profile exists to
 *                                 show what retry soundness would require)
 *   reverts_content_on_failure    in-memory content rolls back to the prior
 *                                 on-disk version (btrfs)
 *   retries_metadata              failed journal/metadata writes are re-queued
 *                                 once before the journal aborts (xfs)
 *   error_flag_cleared_after_first_report
 *                                 per-file error state is reported by exactly
 *                                 one fsync and then cleared, so a retried
 *                                 fsync returns success
 */
struct FsProfile {
  std::string name;
  bool clears_dirty_on_submit = true;
  bool restores_dirty_on_failure = false;
  bool reverts_content_on_failure = false;
  bool retries_metadata = false;
  bool error_flag_cleared_after_first_report = true;
  JournalMode journal_mode = JournalMode::Ordered;
};

inline FsProfile profile_from_name(const std::string& name) {
  FsProfile p;
  p.name = name;
  if (name == "ext4-ordered") {
    p.journal_mode = JournalMode::Ordered;
  } else if (name == "ext4-writeback") {
    p.journal_mode = JournalMode::Writeback;
  } else if (name == "ext4-journal") {
    p.journal_mode = JournalMode::DataJournal;
  } else if (name == "xfs") {
    p.journal_mode = JournalMode::Ordered;
    p.retries_metadata = true;
  } else if (name == "btrfs") {
    p.journal_mode = JournalMode::Ordered;
    p.reverts_content_on_failure = true;
  } else if (name == "restore-dirty") {
    // Hypothetical control: failed pages become dirty again, so retrying the
    // fsync resubmits them. Used to demonstrate what retry soundness needs.
    p.journal_mode = JournalMode::Ordered;
    p.restores_dirty_on_failure = true;
  } else {
    throw ConfigError("unknown fs profile: " + name);
  }
  return p;
}

}  // namespace persistcheck
