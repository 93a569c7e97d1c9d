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

// Change events -> validation runs on working branches -> approval ->
// release runs on main.
//
// Files: events.jsonl (accepted events), plans.jsonl (one plan per event),
// promotions.jsonl (decisions), pins.json (branch -> BranchPins).

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/feedback.hpp"
#include "ca/flow.hpp"
#include "ca/run.hpp"
#include "ca/tuple.hpp"
#include "ca/workspace.hpp"
#include "json.hpp"

namespace ca {

inline constexpr std::string_view kMainBranch = "main";

enum class Source { code, data, dependencies, deployment };
std::string_view to_string(Source source) noexcept;
std::optional<Source> parse_source(std::string_view text) noexcept;

struct ChangeEvent {
  std::string event_id;
  Source source = Source::data;
  std::string ref;
  VersionPin new_pin;
  std::string at;  // filled at ingest when empty

  friend bool operator==(const ChangeEvent&, const ChangeEvent&) = default;
};

struct BranchPins {
  std::string branch;
  ArtifactVersionTuple pins;
  std::optional<RunId> last_release_run;
  std::vector<ArtifactId> result_refs;

  friend bool operator==(const BranchPins&, const BranchPins&) = default;
};

/// What ingest_event decided to run.
struct ValidationPlan {
  std::string event_id;
  std::string branch;
  ArtifactVersionTuple base;
  ArtifactVersionTuple tuple;
  double subset_fraction = 0.1;
  std::int64_t subset_seed = 0;

  friend bool operator==(const ValidationPlan&, const ValidationPlan&) = default;
};

enum class Decision { approved, rejected };
std::string_view to_string(Decision d) noexcept;

struct PromotionRequest {
  RunId run_id;
  std::string approver;
  Decision decision = Decision::approved;
  std::string reason;
  std::string at;

  friend bool operator==(const PromotionRequest&, const PromotionRequest&) = default;
};

void to_json(nlohmann::json& j, const ChangeEvent& e);
void from_json(const nlohmann::json& j, ChangeEvent& e);
void to_json(nlohmann::json& j, const BranchPins& b);
void from_json(const nlohmann::json& j, BranchPins& b);
void to_json(nlohmann::json& j, const ValidationPlan& p);
void from_json(const nlohmann::json& j, ValidationPlan& p);
void to_json(nlohmann::json& j, const PromotionRequest& p);
void from_json(const nlohmann::json& j, PromotionRequest& p);

/// Current pins with the event's component replaced. Throws incomplete-pins
/// when `current` lacks a baseline component.
ArtifactVersionTuple resolve_tuple(const ChangeEvent& event, const BranchPins& current);

/// Keeps ids whose seeded hash falls under `fraction`; never returns an empty
/// list. Input order is preserved. Throws empty-manifest on empty input and
/// invalid-argument unless 0 < fraction <= 1.
std::vector<std::string> subset_select(const std::vector<std::string>& manifest, double fraction,
                                       std::int64_t seed);

/// Newline-separated item ids; blank lines ignored.
std::vector<std::string> parse_item_manifest(std::string_view text);

/// Data scope for running `tuple`. With a content-hashed data pin the item
/// manifest is the pinned artifact (full) or a stored subset of it.
DataScope scope_for(Store& store, const ArtifactVersionTuple& tuple, DataScope::Mode mode,
                    double fraction, std::int64_t seed);

struct PipelineOptions {
  double subset_fraction = 0.1;
  std::int64_t subset_seed = 0;
  std::size_t parallelism = 4;
  GatePolicy gate;
  std::optional<std::map<std::string, std::string>> environment;
};

class Pipeline {
 public:
  explicit Pipeline(Workspace& ws, PipelineOptions options = {});

  /// Idempotent per event_id. Throws malformed-event, unknown-branch,
  /// incomplete-pins.
  ValidationPlan ingest_event(ChangeEvent event);

  /// Subset-scoped validation run labeled with branch and event_id.
  RunRecord run_validation(const ValidationPlan& plan, const FlowGraph& flow, StepExecutor& executor,
                           const std::optional<ArtifactId>& flow_id = std::nullopt);

  /// Requires a succeeded validation run whose metrics pass the gate.
  PromotionRequest approve(const RunId& run, const std::string& approver);
  PromotionRequest reject(const RunId& run, const std::string& approver, const std::string& reason);

  /// Full-scope release of an approved run's tuple on main. Main pins move
  /// only when the release succeeds. `flow` defaults to the validation run's
  /// stored manifest.
  RunRecord run_release(const RunId& approved, StepExecutor& executor, const FlowGraph* flow = nullptr);

  std::map<std::string, BranchPins> pins() const;
  std::optional<BranchPins> branch(const std::string& name) const;
  /// Sets one pin on a branch, creating the branch if needed.
  void set_pin(const std::string& branch, const VersionPin& pin);

  std::vector<ChangeEvent> events() const;
  std::vector<ValidationPlan> plans() const;
  std::vector<PromotionRequest> promotions() const;
  std::optional<PromotionRequest> decision_for(const RunId& run) const;

  const PipelineOptions& options() const noexcept { return options_; }

 private:
  PromotionRequest decide(const RunId& run, const std::string& approver, Decision decision,
                          const std::string& reason);
  void write_pins(const std::map<std::string, BranchPins>& pins);

  Workspace& ws_;
  PipelineOptions options_;
};

}  // namespace ca
