// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

namespace persistcheck {

using InodeId = std::uint32_t;
using PageIndex = std::uint32_t;
using TxnId = std::uint32_t;

inline constexpr InodeId kRootInode = 1;

/**
 * The six layers a write traverses between an application buffer and stable
 * storage. Durability of a write-set means convergence: no layer still holds
 * a pending effect of the set.
 */
enum class LayerId {
  Application,
  PageCache,
  FilesystemJournal,
  BlockLayer,
  ControllerCache,
  PersistentMedia,
};

inline constexpr LayerId kAllLayers[] = {
    LayerId::Application,      LayerId::PageCache,
    LayerId::FilesystemJournal, LayerId::BlockLayer,
    LayerId::ControllerCache,  LayerId::PersistentMedia,
};

inline const char* to_string(LayerId l) {
  switch (l) {
    case LayerId::Application: return "application";
    case LayerId::PageCache: return "page-cache";
    case LayerId::FilesystemJournal: return "filesystem-journal";
    case LayerId::BlockLayer: return "block-layer";
    case LayerId::ControllerCache: return "controller-cache";
    case LayerId::PersistentMedia: return "persistent-media";
  }
  return "?";
}

/**
 * Symbolic page content. Generation 0 is the initial on-media content of any
 * page; the application mints generation 1, 2, ... per (file, page) in write
 * order, so versions of one page are totally ordered by creation.
 */
struct ContentVersion {
  std::uint32_t gen = 0;
  auto operator<=>(const ContentVersion&) const = default;
};

inline const ContentVersion kInitialContent{0};

struct PageKey {
  InodeId file = 0;
  PageIndex index = 0;
  auto operator<=>(const PageKey&) const = default;
};

struct DirEntryKey {
  InodeId dir = kRootInode;
  std::string name;
  auto operator<=>(const DirEntryKey&) const = default;
};

// One data write as named by durability predicates: this version of this page.
struct PageWrite {
  PageKey page;
  ContentVersion version;
  auto operator<=>(const PageWrite&) const = default;
};

// Expected namespace binding; nullopt target means "expected absent".
struct BindingExpect {
  DirEntryKey entry;
  std::optional<InodeId> target;
  auto operator<=>(const BindingExpect&) const = default;
};

/**
 * What a durability question ranges over: data page versions plus, when the
 * workload's effect under test includes namespace operations, the bindings
 * that make those versions reachable.
 */
struct WriteSet {
  std::vector<PageWrite> pages;
  std::vector<BindingExpect> bindings;
  bool empty() const { return pages.empty() && bindings.empty(); }
  auto operator<=>(const WriteSet&) const = default;
};

// Scenario/bounds/usage problems; the CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

template <typename... Ts>
std::string cat(const Ts&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}

}  // namespace detail

inline std::string to_string(const PageKey& k) {
  return detail::cat(k.file, ":", k.index);
}

inline std::string to_string(const PageWrite& w) {
  return detail::cat(w.page.file, ":", w.page.index, ":v", w.version.gen);
}

// FNV-1a over a canonical serialization; stable across runs and platforms.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex_digest(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace persistcheck
