// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "persistcheck/types.hpp"

namespace persistcheck {

// ---------------------------------------------------------------------------
// Multi-step operation protocols
//
// A composite operation (move a file across filesystems, install a package)
// is a sequence of steps over an abstract set of resources. Each step adds
// and removes resource tokens and may or may not have a reverse step. The
// completeness question: interrupted at any point and rolled back, does the
// system always land in either the initial or the final state, or can it
// strand an intermediate one?

struct ProtoStep {
  std::string name;
  std::vector<std::string> adds;
  std::vector<std::string> removes;
  bool has_reverse = true;
};

struct Protocol {
  std::string name;
  std::set<std::string> initial;
  std::vector<ProtoStep> steps;
};

using TokenSet = std::set<std::string>;

namespace detail {

inline void apply_forward(TokenSet& st, const ProtoStep& step) {
  for (const auto& r : step.removes) st.erase(r);
  for (const auto& a : step.adds) st.insert(a);
}

inline void apply_reverse(TokenSet& st, const ProtoStep& step) {
  for (const auto& a : step.adds) st.erase(a);
  for (const auto& r : step.removes) st.insert(r);
}

inline std::string tokens_to_string(const TokenSet& st) {
  std::string s = "{";
  bool first = true;
  for (const auto& t : st) {
    if (!first) s += ", ";
    s += t;
    first = false;
  }
  return s + "}";
}

}  // namespace detail

struct StrandedOutcome {
  TokenSet state;
  std::string reason;       // how the run got stuck there
  int interruptions = 0;
  bool missing_reverse = false;  // stuck because a step has no reverse
};

struct CompletenessResult {
  TokenSet initial;
  TokenSet final_state;
  std::vector<StrandedOutcome> stranded;  // terminal states outside {initial, final}
  bool structurally_incomplete = false;   // some reachable rollback needs a missing reverse
  int outcomes_explored = 0;
};

/**
 * Exhaustively interrupt the protocol. A first interruption before forward
 * step i (1 <= i < n completed) triggers rollback of the completed prefix in
 * reverse order; with budget left, a second interruption may stop the
 * rollback before any reverse step. A terminal state counts as stranded when
 * it differs from both the initial and the completed-run state. Rollback
 * that reaches a step without a reverse stops there; that outcome is
 * structural, no second fault needed.
 */
inline CompletenessResult check_protocol(const Protocol& proto, int max_interruptions) {
  CompletenessResult res;
  res.initial = proto.initial;
  res.final_state = proto.initial;
  for (const auto& step : proto.steps) detail::apply_forward(res.final_state, step);

  std::set<std::string> seen;
  auto record = [&](const TokenSet& st, const std::string& reason, int faults,
                    bool missing) {
    ++res.outcomes_explored;
    if (st == res.initial || st == res.final_state) return;
    std::string key = detail::tokens_to_string(st) + "|" + reason;
    if (!seen.insert(key).second) return;
    res.stranded.push_back(StrandedOutcome{st, reason, faults, missing});
    if (missing) res.structurally_incomplete = true;
  };

  const int n = static_cast<int>(proto.steps.size());
  // Uninterrupted run and the trivial immediate interruption.
  record(res.final_state, "completed", 0, false);
  if (max_interruptions < 1) return res;

  for (int i = 1; i < n; ++i) {
    TokenSet st = proto.initial;
    for (int k = 0; k < i; ++k) detail::apply_forward(st, proto.steps[k]);
    // Interrupted after i forward steps; roll back i-1 .. 0.
    TokenSet rolled = st;
    bool stuck = false;
    for (int j = i - 1; j >= 0; --j) {
      const ProtoStep& step = proto.steps[j];
      if (!step.has_reverse) {
        record(rolled, detail::cat("interrupted after '", proto.steps[i - 1].name,
                                   "', rollback blocked at '", step.name,
                                   "' (no reverse)"),
               1, true);
        stuck = true;
        break;
      }
      if (max_interruptions >= 2) {
        // Second interruption right before this reverse step.
        record(rolled, detail::cat("interrupted after '", proto.steps[i - 1].name,
                                   "', rollback interrupted before undoing '",
                                   step.name, "'"),
               2, false);
      }
      detail::apply_reverse(rolled, step);
    }
    if (!stuck) record(rolled, detail::cat("interrupted after '", proto.steps[i - 1].name,
                                           "', rollback completed"),
                       1, false);
  }
  return res;
}

}  // namespace persistcheck
