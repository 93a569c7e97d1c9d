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

// Provenance graph over artifacts and runs.
//
//   consumed: artifact -> run   (external input of the run)
//   pinned:   artifact -> run   (tuple component with a content hash)
//   produced: run -> artifact   (step output or run result)
//
// lineage.jsonl is the durable record; the adjacency index is a cache.

#include <compare>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ca/run.hpp"
#include "ca/store.hpp"
#include "json.hpp"

namespace ca {

struct FlowGraph;
class StepExecutor;
class Workspace;

using LineageNode = std::variant<ArtifactId, RunId>;

/// Artifacts render as "<kind>:<hash>", runs as "run:<token>".
std::string to_string(const LineageNode& node);
LineageNode parse_lineage_node(std::string_view text);

enum class EdgeRole { consumed, produced, pinned };
std::string_view to_string(EdgeRole role) noexcept;

struct LineageEdge {
  LineageNode from;
  LineageNode to;
  EdgeRole role = EdgeRole::consumed;

  friend bool operator==(const LineageEdge&, const LineageEdge&) = default;
  friend auto operator<=>(const LineageEdge&, const LineageEdge&) = default;
};

void to_json(nlohmann::json& j, const LineageEdge& e);
void from_json(const nlohmann::json& j, LineageEdge& e);

/// Edges a run contributes: consumed for every input not produced inside the
/// run, pinned for every content-hashed tuple pin that resolves in `store`,
/// produced for every output and result. Sorted, no duplicates.
std::vector<LineageEdge> edges_for_run(const Store& store, const RunRecord& run,
                                       const std::vector<StepOutcome>& outcomes);

/// In-memory adjacency over an edge list. Immutable; safe to share.
class LineageIndex {
 public:
  explicit LineageIndex(const std::vector<LineageEdge>& edges);

  /// Runs with a consumed or pinned edge from `artifact`, unordered.
  std::set<RunId> runs_using(const ArtifactId& artifact) const;

  /// `artifact` plus everything reachable by walking produced edges back to
  /// runs and consumed/pinned edges back to their inputs.
  std::set<LineageNode> provenance_of(const ArtifactId& artifact) const;

 private:
  std::map<ArtifactId, std::set<RunId>> users_;
  std::map<ArtifactId, std::set<RunId>> producers_;
  std::map<RunId, std::set<ArtifactId>> inputs_;
};

class Lineage {
 public:
  Lineage(Store& store, RunRegistry& runs) : store_(store), runs_(runs) {}

  /// Appends the run's edges that are not already logged; returns how many
  /// were appended (zero on a repeat call).
  std::size_t record_edges(const RunRecord& run, const std::vector<StepOutcome>& outcomes);

  /// Appends raw edges, skipping ones already present.
  std::size_t append(const std::vector<LineageEdge>& edges);

  /// Sorted by run start time, then run id. Runs without a record sort last.
  std::vector<RunId> runs_using(const ArtifactId& artifact) const;
  std::set<LineageNode> provenance_of(const ArtifactId& artifact) const;

  std::vector<LineageEdge> edges() const;

 private:
  void refresh_locked() const;

  Store& store_;
  RunRegistry& runs_;
  mutable std::mutex mu_;
  mutable std::vector<LineageEdge> edges_;
  mutable std::set<LineageEdge> edge_set_;
  mutable std::uintmax_t offset_ = 0;
};

struct Divergence {
  std::string task;  // "step", "step[i]" or "step[merge]"
  std::string step;
  std::string slot;
  std::optional<ContentHash> old_hash;
  std::optional<ContentHash> new_hash;
};

struct ReplayResult {
  bool identical = false;
  std::vector<Divergence> diverged;
  RunRecord replay;
};

void to_json(nlohmann::json& j, const ReplayResult& r);

/// Re-executes `run_id` with its recorded tuple and data scope and compares
/// every output slot by hash. The replay is recorded as a validation run
/// labeled replay-of=<run_id>. Throws missing-input if a pinned or consumed
/// input is gone or corrupt. `flow` defaults to the run's stored manifest.
ReplayResult replay_check(Workspace& ws, const RunId& run_id, StepExecutor& executor,
                          const FlowGraph* flow = nullptr, std::size_t parallelism = 4);

}  // namespace ca
