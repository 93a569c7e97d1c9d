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

#include <optional>
#include <string_view>

#include "ca/feedback.hpp"
#include "ca/flow.hpp"
#include "ca/lineage.hpp"
#include "ca/repository.hpp"
#include "ca/run.hpp"
#include "ca/store.hpp"

namespace ca {

/// An opened repository with its store, run registry, feedback and lineage
/// services wired together.
class Workspace {
 public:
  explicit Workspace(Repository repo);
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  const Repository& repo() const noexcept { return store_.repo(); }
  Store& store() noexcept { return store_; }
  RunRegistry& runs() noexcept { return runs_; }
  Feedback& feedback() noexcept { return feedback_; }
  Lineage& lineage() noexcept { return lineage_; }

  /// Stores manifest text as a code artifact.
  ArtifactId store_flow(std::string_view manifest_text);
  /// Parses the manifest a run was executed from. Throws missing-input when
  /// the run has none or it is gone.
  FlowGraph load_flow(const RunRecord& run) const;

  /// execute() followed by feedback collection and lineage recording. The
  /// metrics artifact is the output named by graph.metrics_output, if any.
  /// Returns the persisted record, feedback id included.
  RunRecord run_experiment(const FlowGraph& graph, const ArtifactVersionTuple& tuple,
                           StepExecutor& executor, const ExecuteOptions& options = {});

 private:
  void finish(const FlowGraph& graph, const RunRecord& run);

  Store store_;
  RunRegistry runs_;
  Feedback feedback_;
  Lineage lineage_;
};

}  // namespace ca
