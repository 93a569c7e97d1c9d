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

#include "ca/store.hpp"

#include <algorithm>

#include "ca/error.hpp"
#include "ca/io.hpp"

namespace ca {

using nlohmann::json;

std::string_view to_string(ArtifactKind kind) noexcept {
  switch (kind) {
    case ArtifactKind::data: return "data";
    case ArtifactKind::code: return "code";
    case ArtifactKind::dependency: return "dependency";
    case ArtifactKind::test: return "test";
    case ArtifactKind::deployment: return "deployment";
    case ArtifactKind::result: return "result";
  }
  return "data";
}

std::optional<ArtifactKind> parse_artifact_kind(std::string_view name) noexcept {
  for (auto kind : kAllArtifactKinds) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string ArtifactId::str() const {
  return std::string(to_string(kind)) + ":" + hash.hex();
}

ArtifactId ArtifactId::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(Errc::invalid_argument, "artifact id must be <kind>:<hash>, got '" +
                                            std::string(text) + "'");
  }
  auto kind = parse_artifact_kind(text.substr(0, colon));
  if (!kind) {
    throw Error(Errc::invalid_argument, "unknown artifact kind in '" + std::string(text) + "'");
  }
  return ArtifactId{*kind, ContentHash::from_hex(text.substr(colon + 1))};
}

void to_json(json& j, const ArtifactId& id) { j = id.str(); }

void from_json(const json& j, ArtifactId& id) { id = ArtifactId::parse(j.get<std::string>()); }

void to_json(json& j, const ArtifactRecord& r) {
  j = json{{"kind", to_string(r.id.kind)}, {"hash", r.id.hash.hex()},
           {"size", r.size},               {"media_type", r.media_type},
           {"created_at", r.created_at},   {"labels", r.labels}};
}

void from_json(const json& j, ArtifactRecord& r) {
  auto kind = parse_artifact_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(Errc::storage_io, "index record with unknown kind");
  r.id = ArtifactId{*kind, ContentHash::from_hex(j.at("hash").get<std::string>())};
  r.size = j.at("size").get<std::uint64_t>();
  r.media_type = j.at("media_type").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.labels = j.at("labels").get<Labels>();
}

Store::Store(Repository repo) : repo_(std::move(repo)) {
  std::lock_guard guard(mu_);
  refresh_locked();
}

fs::path Store::object_path(const ContentHash& hash) const {
  const auto& hex = hash.hex();
  return repo_.objects_dir() / hex.substr(0, 2) / hex.substr(2);
}

void Store::refresh_locked() const {
  for (const auto& line : io::read_lines_from(repo_.index_path(), index_offset_)) {
    if (line.empty()) continue;
    ArtifactRecord rec;
    try {
      rec = json::parse(line).get<ArtifactRecord>();
    } catch (const json::exception& e) {
      throw Error(Errc::storage_io, std::string("corrupt index.jsonl line: ") + e.what());
    }
    index_.try_emplace(rec.id, std::move(rec));
  }
}

ArtifactId Store::put(ArtifactKind kind, std::string_view bytes, std::string media_type,
                      Labels labels) {
  for (const auto& [key, _] : labels) {
    if (key.empty()) throw Error(Errc::invalid_argument, "label keys must be nonempty");
  }
  if (!Repository::is_initialized(repo_.root())) {
    throw Error(Errc::repo_not_initialized, "no repository at '" + repo_.root().string() + "'");
  }
  ArtifactId id{kind, ContentHash::of(bytes)};
  auto path = object_path(id.hash);
  auto blob_ok = [&] {
    auto existing = io::try_read_file(path);
    return existing && ContentHash::of(*existing) == id.hash;
  };
  {
    std::lock_guard guard(mu_);
    refresh_locked();
    if (index_.contains(id) && blob_ok()) return id;
  }

  auto lock = repo_.lock();
  std::lock_guard guard(mu_);
  refresh_locked();
  const bool indexed = index_.contains(id);
  if (!blob_ok()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::storage_io, "mkdir '" + path.parent_path().string() + "': " + ec.message());
    io::write_file_atomic(path, bytes);
  }
  if (indexed) return id;  // blob repaired

  ArtifactRecord rec{id, bytes.size(), std::move(media_type), io::now_rfc3339(), std::move(labels)};
  io::append_line(repo_.index_path(), json(rec).dump());
  refresh_locked();
  return id;
}

bool Store::contains(const ArtifactId& id) const {
  std::lock_guard guard(mu_);
  refresh_locked();
  return index_.contains(id);
}

std::optional<ArtifactRecord> Store::record(const ArtifactId& id) const {
  std::lock_guard guard(mu_);
  refresh_locked();
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Blob Store::get(const ArtifactId& id) const {
  if (!contains(id)) throw Error(Errc::not_found, id.str());
  auto bytes = io::try_read_file(object_path(id.hash));
  if (!bytes) throw Error(Errc::integrity_violation, "object file missing for " + id.str());
  if (ContentHash::of(*bytes) != id.hash) {
    throw Error(Errc::integrity_violation, "stored bytes do not match digest of " + id.str());
  }
  return *std::move(bytes);
}

bool Store::verify(const ArtifactId& id) const {
  if (!contains(id)) throw Error(Errc::not_found, id.str());
  auto bytes = io::try_read_file(object_path(id.hash));
  return bytes && ContentHash::of(*bytes) == id.hash;
}

std::vector<ArtifactRecord> Store::list(std::optional<ArtifactKind> kind,
                                        const Labels& label_filter) const {
  std::vector<ArtifactRecord> out;
  {
    std::lock_guard guard(mu_);
    refresh_locked();
    for (const auto& [id, rec] : index_) {
      if (kind && id.kind != *kind) continue;
      bool match = std::all_of(label_filter.begin(), label_filter.end(), [&](const auto& kv) {
        auto it = rec.labels.find(kv.first);
        return it != rec.labels.end() && it->second == kv.second;
      });
      if (match) out.push_back(rec);
    }
  }
  std::sort(out.begin(), out.end(), [](const ArtifactRecord& a, const ArtifactRecord& b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

std::vector<ArtifactId> Store::find(const ContentHash& hash) const {
  std::vector<ArtifactId> out;
  std::lock_guard guard(mu_);
  refresh_locked();
  for (auto kind : kAllArtifactKinds) {
    ArtifactId id{kind, hash};
    if (index_.contains(id)) out.push_back(id);
  }
  return out;
}

}  // namespace ca
