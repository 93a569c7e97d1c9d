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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/store.hpp"
#include "ca/tuple.hpp"
#include "json.hpp"

namespace ca {

/// `<first 12 hex of tuple hash>-<sequence, zero-padded to 6 digits>`.
class RunId {
 public:
  RunId() = default;
  static RunId make(const ContentHash& tuple_hash, std::uint64_t sequence);
  /// Throws Error{invalid_argument} on a malformed token.
  static RunId parse(std::string_view token);

  const std::string& str() const noexcept { return token_; }
  std::string_view tuple_prefix() const noexcept { return std::string_view(token_).substr(0, 12); }
  std::uint64_t sequence() const;

  friend bool operator==(const RunId&, const RunId&) = default;
  friend auto operator<=>(const RunId&, const RunId&) = default;

 private:
  explicit RunId(std::string token) : token_(std::move(token)) {}
  std::string token_;
};

enum class RunKind { validation, release };
enum class RunStatus { running, succeeded, failed };

std::string_view to_string(RunKind kind) noexcept;
std::string_view to_string(RunStatus status) noexcept;

/// One executed task of a flow step: a plain step, one partition of a
/// partitioned step, or the merge of a partitioned step.
struct StepOutcome {
  std::string step;
  std::optional<int> partition_index;
  bool merge = false;
  int exit_code = 0;
  std::map<std::string, ArtifactId> input_ids;
  std::map<std::string, ArtifactId> output_ids;
  ArtifactId log_id;
  std::string command_rendered;
  std::int64_t wall_time_ms = 0;
  ArtifactId env_snapshot_id;

  bool succeeded() const noexcept { return exit_code == 0; }
  /// "step", "step[2]" or "step[merge]".
  std::string task_name() const;

  friend bool operator==(const StepOutcome&, const StepOutcome&) = default;
};

struct DataScope {
  enum class Mode { full, subset };
  Mode mode = Mode::full;
  double fraction = 1.0;
  std::int64_t seed = 0;
  /// Item-id manifest handed to steps as `__data_manifest`, when the data pin
  /// carries content.
  std::optional<ArtifactId> manifest_id;

  friend bool operator==(const DataScope&, const DataScope&) = default;
};

struct RunRecord {
  RunId run_id;
  ArtifactVersionTuple tuple;
  RunKind kind = RunKind::validation;
  std::string branch;
  std::string started_at;
  std::optional<std::string> finished_at;
  RunStatus status = RunStatus::running;
  std::vector<StepOutcome> step_outcomes;
  std::vector<std::string> skipped_steps;
  std::vector<ArtifactId> result_ids;
  std::optional<ArtifactId> feedback_id;
  std::optional<ArtifactId> flow_id;
  DataScope data_scope;
  Labels labels;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

void to_json(nlohmann::json& j, const RunId& id);
void from_json(const nlohmann::json& j, RunId& id);
void to_json(nlohmann::json& j, const StepOutcome& o);
void from_json(const nlohmann::json& j, StepOutcome& o);
void to_json(nlohmann::json& j, const DataScope& s);
void from_json(const nlohmann::json& j, DataScope& s);
void to_json(nlohmann::json& j, const RunRecord& r);
void from_json(const nlohmann::json& j, RunRecord& r);

/// Store kind a tuple component's content is expected to have: code -> code,
/// dependencies -> dependency, deployment -> deployment, test(s) -> test,
/// anything else -> data.
ArtifactKind preferred_kind(std::string_view component) noexcept;

/// The stored artifact holding a pin's content, preferring preferred_kind().
/// nullopt when the pin has no content hash or nothing in the store matches.
std::optional<ArtifactId> resolve_pin(const Store& store, const VersionPin& pin);

/// Run-id allocation (counters.json) and run records (runs/<id>.json).
class RunRegistry {
 public:
  explicit RunRegistry(Store& store) : store_(store) {}

  /// Persists the incremented counter before returning, so a token is never
  /// handed out twice, even across process restarts.
  RunId mint(const ArtifactVersionTuple& tuple);

  /// Write-once. Identical content is a no-op; different content is a
  /// conflict; references to artifacts missing from the store are rejected.
  void record(const RunRecord& run);

  /// Sets feedback_id on a persisted record that has none (or the same one).
  void attach_feedback(const RunId& id, const ArtifactId& feedback_id);

  std::optional<RunRecord> find(const RunId& id) const;
  /// Throws Error{run_not_found}.
  RunRecord load(const RunId& id) const;
  /// Ordered by (started_at, run_id).
  std::vector<RunRecord> list() const;

  Store& store() const noexcept { return store_; }

 private:
  void check_references(const RunRecord& run) const;
  fs::path path_for(const RunId& id) const;

  Store& store_;
};

}  // namespace ca
