// Copyright 2026 The Continuous Analysis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Content-addressed, append-only artifact store.
//
// Blobs live under objects/<first two hex>/<remaining 62 hex>, one file per
// distinct byte string. index.jsonl holds one record per (kind, hash). The
// same bytes stored under two kinds share a blob file but are two artifacts.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/hash.hpp"
#include "ca/repository.hpp"
#include "json.hpp"

namespace ca {

enum class ArtifactKind { data, code, dependency, test, deployment, result };

inline constexpr std::array<ArtifactKind, 6> kAllArtifactKinds = {
    ArtifactKind::data,       ArtifactKind::code,  ArtifactKind::dependency,
    ArtifactKind::test,       ArtifactKind::deployment, ArtifactKind::result};

std::string_view to_string(ArtifactKind kind) noexcept;
std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) noexcept;

using Labels = std::map<std::string, std::string>;

struct ArtifactId {
  ArtifactKind kind = ArtifactKind::data;
  ContentHash hash;

  /// "<kind>:<hash>", e.g. "data:e3b0c442...".
  std::string str() const;
  /// Throws Error{invalid_argument}.
  static ArtifactId parse(std::string_view text);

  friend bool operator==(const ArtifactId&, const ArtifactId&) = default;
  friend auto operator<=>(const ArtifactId&, const ArtifactId&) = default;
};

struct ArtifactRecord {
  ArtifactId id;
  std::uint64_t size = 0;
  std::string media_type;
  std::string created_at;
  Labels labels;

  friend bool operator==(const ArtifactRecord&, const ArtifactRecord&) = default;
};

void to_json(nlohmann::json& j, const ArtifactId& id);
void from_json(const nlohmann::json& j, ArtifactId& id);
void to_json(nlohmann::json& j, const ArtifactRecord& r);
void from_json(const nlohmann::json& j, ArtifactRecord& r);

/// Thread-safe. The in-memory index is a cache of index.jsonl, refreshed
/// incrementally so writes from other processes become visible.
class Store {
 public:
  explicit Store(Repository repo);

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const Repository& repo() const noexcept { return repo_; }

  /// Idempotent on (kind, bytes): a re-put returns the existing id and keeps
  /// the original record (labels are fixed at first put).
  ArtifactId put(ArtifactKind kind, std::string_view bytes,
                 std::string media_type = "application/octet-stream", Labels labels = {});

  /// Throws not-found or integrity-violation.
  Blob get(const ArtifactId& id) const;

  /// True iff the stored bytes still hash to id.hash. Throws not-found.
  bool verify(const ArtifactId& id) const;

  bool contains(const ArtifactId& id) const;
  std::optional<ArtifactRecord> record(const ArtifactId& id) const;

  /// Records of `kind` (all kinds when nullopt) whose labels contain every
  /// pair of `label_filter`, ordered by (created_at, id).
  std::vector<ArtifactRecord> list(std::optional<ArtifactKind> kind = std::nullopt,
                                   const Labels& label_filter = {}) const;

  /// Every indexed artifact whose content is `hash`, in kind order.
  std::vector<ArtifactId> find(const ContentHash& hash) const;

  fs::path object_path(const ContentHash& hash) const;

 private:
  void refresh_locked() const;

  Repository repo_;
  mutable std::mutex mu_;
  mutable std::map<ArtifactId, ArtifactRecord> index_;
  mutable std::uintmax_t index_offset_ = 0;
};

}  // namespace ca
