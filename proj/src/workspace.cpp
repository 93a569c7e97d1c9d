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


#include "ca/workspace.hpp"

#include "ca/error.hpp"

namespace ca {

Workspace::Workspace(Repository repo)
    : store_(std::move(repo)), runs_(store_), feedback_(store_, runs_), lineage_(store_, runs_) {}

ArtifactId Workspace::store_flow(std::string_view manifest_text) {
  return store_.put(ArtifactKind::code, manifest_text, "application/json", {{"role", "flow"}});
}

FlowGraph Workspace::load_flow(const RunRecord& run) const {
  if (!run.flow_id) {
    throw Error(Errc::missing_input, "run " + run.run_id.str() + " has no recorded flow manifest");
  }
  if (!store_.contains(*run.flow_id) || !store_.verify(*run.flow_id)) {
    throw Error(Errc::missing_input, "flow manifest " + run.flow_id->str() + " is missing or corrupt");
  }
  return parse_manifest(store_.get(*run.flow_id));
}

void Workspace::finish(const FlowGraph& graph, const RunRecord& run) {
  std::optional<ArtifactId> metrics;
  if (graph.metrics_output) {
    for (const auto& o : run.step_outcomes) {
      if (o.step != graph.metrics_output->step || o.partition_index) continue;
      if (auto it = o.output_ids.find(graph.metrics_output->slot); it != o.output_ids.end()) {
        metrics = it->second;
      }
    }
  }
  std::optional<Error> deferred;
  if (metrics) {
    try {
      parse_metrics_document(store_.get(*metrics));
    } catch (const Error& e) {
      deferred = e;
      metrics.reset();
    }
  }
  feedback_.collect(run, run.step_outcomes, metrics);
  lineage_.record_edges(run, run.step_outcomes);
  if (deferred) throw *deferred;
}

RunRecord Workspace::run_experiment(const FlowGraph& graph, const ArtifactVersionTuple& tuple,
                                    StepExecutor& executor, const ExecuteOptions& options) {
  RunRecord run;
  try {
    run = execute(runs_, graph, tuple, executor, options);
  } catch (const ExecutorFailure& e) {
    finish(graph, e.run());
    throw;
  }
  finish(graph, run);
  return runs_.load(run.run_id);
}

}  // namespace ca
