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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/run.hpp"
#include "ca/store.hpp"
#include "ca/tuple.hpp"
#include "json.hpp"

namespace ca {

using MetricMap = std::map<std::string, double>;

/// What one executed task left behind: log, command, inputs, outputs,
/// telemetry and the captured environment.
struct FeedbackEntry {
  std::string task;
  std::string step;
  std::optional<int> partition_index;
  bool merge = false;
  ArtifactId log_id;
  std::string command_rendered;
  std::map<std::string, std::string> input_parameters;
  std::map<std::string, ArtifactId> output_ids;
  std::int64_t wall_time_ms = 0;
  int exit_code = 0;
  ArtifactId env_snapshot_id;

  friend bool operator==(const FeedbackEntry&, const FeedbackEntry&) = default;
};

struct FeedbackBundle {
  RunId run_id;
  std::string engine_version;
  std::vector<FeedbackEntry> entries;
  MetricMap metrics;

  friend bool operator==(const FeedbackBundle&, const FeedbackBundle&) = default;
};

void to_json(nlohmann::json& j, const FeedbackEntry& e);
void from_json(const nlohmann::json& j, FeedbackEntry& e);
void to_json(nlohmann::json& j, const FeedbackBundle& b);
void from_json(const nlohmann::json& j, FeedbackBundle& b);

/// One entry per outcome, in outcome order. Pure.
FeedbackBundle build_bundle(const RunRecord& run, const std::vector<StepOutcome>& outcomes);

/// Parses a flat JSON object of numbers. Throws malformed-metrics-document.
MetricMap parse_metrics_document(std::string_view text);

enum class Comparator { le, lt, ge, gt, eq };

std::string_view to_string(Comparator op) noexcept;
std::optional<Comparator> parse_comparator(std::string_view text) noexcept;
bool compare(double observed, Comparator op, double threshold) noexcept;

struct GateConstraint {
  std::string metric;
  Comparator op = Comparator::ge;
  double threshold = 0.0;
};

struct GatePolicy {
  std::vector<GateConstraint> constraints;

  /// `{"constraints":[{"metric":"accuracy","op":">=","threshold":0.9}]}`.
  /// Throws schema-error (or parse-error on malformed JSON).
  static GatePolicy parse(std::string_view text);
};

struct GateResult {
  std::string metric;
  std::optional<double> observed;
  std::string required;  // e.g. ">= 0.9"
  bool satisfied = false;
};

struct GateReport {
  bool pass = true;
  std::vector<GateResult> results;
};

void to_json(nlohmann::json& j, const GateReport& r);

/// Exact comparisons; a missing metric fails its constraint; an empty policy
/// passes.
GateReport evaluate_gate(const MetricMap& metrics, const GatePolicy& policy);

struct MetricDelta {
  std::string metric;
  double value_a = 0.0;
  double value_b = 0.0;
  double delta = 0.0;  // b - a
};

struct RunComparison {
  RunId a;
  RunId b;
  std::vector<MetricDelta> deltas;
  std::map<std::string, double> only_in_a;
  std::map<std::string, double> only_in_b;
  std::vector<PinChange> tuple_diff;
};

void to_json(nlohmann::json& j, const RunComparison& c);

class Feedback {
 public:
  Feedback(Store& store, RunRegistry& runs) : store_(store), runs_(runs) {}

  /// Builds the bundle, merges metrics from `metrics_artifact` when given,
  /// stores it as a Result artifact and attaches it to the run.
  FeedbackBundle collect(const RunRecord& run, const std::vector<StepOutcome>& outcomes,
                         const std::optional<ArtifactId>& metrics_artifact = std::nullopt);

  /// Parses the metrics artifact and merges it into bundle.metrics.
  MetricMap extract_metrics(FeedbackBundle& bundle, const ArtifactId& metrics_artifact) const;

  /// Throws missing-feedback when the run has no bundle.
  FeedbackBundle load_bundle(const RunId& run) const;

  /// Throws not-aligned or missing-feedback.
  RunComparison compare_runs(const RunId& a, const RunId& b) const;

 private:
  Store& store_;
  RunRegistry& runs_;
};

}  // namespace ca
