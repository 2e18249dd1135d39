#pragma once

// Knowledge base: persisted best-known configurations per (tree, workload)
// pair, and derivation of configurations for pairs never seen before.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "skelrt/platform.hpp"
#include "skelrt/workload.hpp"

namespace skelrt {

/// Ordered by rank: a higher provenance replaces a lower one.
enum class Provenance { Derived = 0, Balanced = 1, Built = 2 };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct Profile {
  std::string sct_id;
  WorkloadId workload;
  Split split;
  PlatformConfig platform;
  double best_time = 0.0;  // ms
  Provenance provenance = Provenance::Derived;

  void validate() const;
  friend bool operator==(const Profile&, const Profile&) = default;
};

nlohmann::ordered_json to_json(const Profile& p);
Profile profile_from_json(const nlohmann::json& j);

enum class DerivationScope { Exact, SameSct, SameWorkload, SameDimensionality, ColdStart };

std::string_view to_string(DerivationScope s);

struct Derivation {
  Split split;
  PlatformConfig platform;  // wgs map may be empty on cold start
  DerivationScope scope = DerivationScope::ColdStart;
  std::size_t scope_size = 0;  // profiles the derivation drew on
  std::optional<Profile> exact;
};

class KnowledgeBase {
 public:
  static constexpr std::string_view kFormat = "skelrt-kb";
  static constexpr int kVersion = 1;

  /// In-memory only.
  KnowledgeBase() = default;
  /// Loads `path` if it exists; every accepted store appends one record.
  explicit KnowledgeBase(std::filesystem::path path);

  KnowledgeBase(const KnowledgeBase&) = delete;
  KnowledgeBase& operator=(const KnowledgeBase&) = delete;

  /// Upsert keyed by (sct_id, workload). Replaces only a slower profile or
  /// one of lower provenance. Returns whether the KB changed.
  bool store(const Profile& profile);

  std::optional<Profile> lookup(const std::string& sct_id, const WorkloadId& workload) const;
  bool has_built(const std::string& sct_id, const WorkloadId& workload) const;
  std::vector<Profile> profiles() const;
  std::size_t size() const;

  Derivation derive(const std::string& sct_id, const WorkloadId& workload) const;

  /// Rewrites the backing file with one record per key, in key order.
  void compact();

  const std::optional<std::filesystem::path>& path() const noexcept { return path_; }

 private:
  using Key = std::pair<std::string, WorkloadId>;

  void append(const Profile& p);
  void write_header(std::ostream& out) const;

  std::optional<std::filesystem::path> path_;
  std::map<Key, Profile> profiles_;
  mutable std::shared_mutex mutex_;
};

}  // namespace skelrt
