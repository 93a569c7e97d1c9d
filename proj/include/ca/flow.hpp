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

// Experiment flows: a DAG of steps wired by named slots.
//
// Command templates understand these placeholders:
//   {input:<slot>}   path of an input file, always `in/<slot>`
//   {output:<slot>}  path the step must write, always `out/<slot>`
//   {partition}      partition index (partitioned steps only)
//   {partitions}     merge only: `in/__partition_0 in/__partition_1 ...`
//
// Paths are relative to a fresh per-task working directory, so a rendered
// command is identical across runs of the same flow.

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ca/executor.hpp"
#include "ca/error.hpp"
#include "ca/run.hpp"
#include "ca/store.hpp"
#include "ca/tuple.hpp"

namespace ca {

/// Reserved input slot carrying the run's (possibly subset) data manifest.
inline constexpr std::string_view kDataManifestSlot = "__data_manifest";
/// Merge inputs are named `__partition_<i>`.
inline constexpr std::string_view kPartitionSlotPrefix = "__partition_";

struct SlotRef {
  std::string step;
  std::string slot;

  friend bool operator==(const SlotRef&, const SlotRef&) = default;
  friend auto operator<=>(const SlotRef&, const SlotRef&) = default;
};

struct ExternalArtifact {
  ArtifactId id;
  friend bool operator==(const ExternalArtifact&, const ExternalArtifact&) = default;
  friend auto operator<=>(const ExternalArtifact&, const ExternalArtifact&) = default;
};

struct PinnedComponent {
  std::string component;
  friend bool operator==(const PinnedComponent&, const PinnedComponent&) = default;
  friend auto operator<=>(const PinnedComponent&, const PinnedComponent&) = default;
};

/// Where a step input comes from: a stored artifact, the content of a tuple
/// pin, or an output slot of an upstream step.
using InputRef = std::variant<ExternalArtifact, PinnedComponent, SlotRef>;

bool is_external(const InputRef& ref) noexcept;
/// "artifact:<id>", "pin:<component>" or "<step>.<slot>".
std::string describe(const InputRef& ref);

struct PartitionSpec {
  int count = 1;
  std::string merge_command;

  friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct StepSpec {
  std::string name;
  std::string command;
  std::map<std::string, InputRef> inputs;
  std::vector<std::string> outputs;
  std::optional<PartitionSpec> partition;

  friend bool operator==(const StepSpec&, const StepSpec&) = default;
};

struct FlowGraph {
  std::vector<StepSpec> steps;
  std::vector<SlotRef> outcomes;
  std::vector<std::string> env_whitelist;
  /// Flat JSON metrics document produced by the flow, if any.
  std::optional<SlotRef> metrics_output;

  const StepSpec* find(std::string_view name) const;
};

/// Parses a JSON manifest:
///
///   {"steps":[{"name","command","inputs":{slot:{"artifact":id}|{"pin":c}|
///              {"step":s,"slot":o}},"outputs":[...],
///              "partition":{"count":n,"merge_command":...}?}],
///    "outcomes":[{"step","slot"}], "env_whitelist":[...],
///    "metrics_output":{"step","slot"}?}
///
/// Step-local rules are enforced here (schema-error): known fields only,
/// valid names, unique outputs, placeholders naming declared slots, a
/// partitioned step declaring exactly one output. Graph-level problems
/// (cycles, dangling references) are left to validate().
FlowGraph parse_manifest(std::string_view text);

struct Violation {
  /// duplicate-step | dangling-reference | unknown-outcome | cycle
  std::string kind;
  std::string message;
  std::vector<std::string> steps;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Empty means the graph is valid.
std::vector<Violation> validate(const FlowGraph& graph);

/// Kahn's algorithm with a lexicographic ready set. Throws Error{cycle}.
std::vector<std::string> topo_order(const FlowGraph& graph);

/// External inputs with a directed path to a designated outcome.
std::set<InputRef> critical_artifacts(const FlowGraph& graph);

/// Graphviz rendering: boxes for steps, notes for external inputs, slot
/// labels on edges, designated outcomes double-circled.
std::string to_dot(const FlowGraph& graph);

struct ExecuteOptions {
  RunKind kind = RunKind::validation;
  DataScope scope;
  std::string branch = "main";
  Labels labels;
  std::size_t parallelism = 4;
  /// The manifest artifact this graph was parsed from, recorded on the run.
  std::optional<ArtifactId> flow_id;
  /// Source of whitelisted environment variables; the process environment
  /// when nullopt.
  std::optional<std::map<std::string, std::string>> environment;
};

/// executor-failure raised after the failed run was persisted.
class ExecutorFailure : public Error {
 public:
  ExecutorFailure(const std::string& message, RunRecord run)
      : Error(Errc::executor_failure, message), run_(std::move(run)) {}
  const RunRecord& run() const noexcept { return run_; }

 private:
  RunRecord run_;
};

/// Runs the graph under `executor` and persists the RunRecord.
///
/// Independent tasks run concurrently up to `parallelism`. A partitioned step
/// fans out into `count` tasks; its merge runs after all of them. After the
/// first failure no further task is started, tasks already running finish,
/// and everything not run is listed in skipped_steps. Throws
/// unresolved-input before minting a run id; throws executor-failure after
/// persisting a failed run if the executor itself broke down.
RunRecord execute(RunRegistry& runs, const FlowGraph& graph, const ArtifactVersionTuple& tuple,
                  StepExecutor& executor, const ExecuteOptions& options = {});

}  // namespace ca
