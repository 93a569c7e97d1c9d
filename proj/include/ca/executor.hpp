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

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ca/hash.hpp"

namespace ca {

inline constexpr std::string_view kEngineVersion = "ca-engine/0.1.0";

/// One task handed to an executor. Input files already exist at the given
/// paths; declared outputs are expected under `workdir/out/<slot>`.
struct StepRequest {
  std::string step;
  std::optional<int> partition_index;
  bool merge = false;
  std::string command;
  std::map<std::string, std::filesystem::path> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> env;
  std::filesystem::path workdir;

  /// Matches StepOutcome::task_name().
  std::string task_name() const;
};

struct StepResult {
  int exit_code = 0;
  std::map<std::string, Blob> outputs;
  Blob log;
  Blob env_snapshot;
};

/// Execution substrate. Implementations must be callable from several threads
/// at once. A nonzero exit code is a normal result; infrastructure trouble is
/// reported by throwing Error{spawn_failure}. A zero exit with a declared
/// output missing is reported by throwing Error{missing_output}.
class StepExecutor {
 public:
  virtual ~StepExecutor() = default;
  virtual StepResult run(const StepRequest& request) = 0;
};

/// Sorted `KEY=VALUE` lines followed by the engine version line.
Blob render_env_snapshot(const std::map<std::string, std::string>& env);

/// Runs `/bin/sh -c <command>` inside request.workdir with stdout and stderr
/// captured into one log. Only the request's env plus PATH is passed on.
class ProcessExecutor : public StepExecutor {
 public:
  StepResult run(const StepRequest& request) override;
};

/// Returns scripted results; for tests and dry runs. Scripts are looked up
/// by task name ("step", "step[2]", "step[merge]") and then by step name.
class RecordingExecutor : public StepExecutor {
 public:
  using Script = std::function<StepResult(const StepRequest&)>;

  void script(const std::string& task, StepResult result);
  void script(const std::string& task, Script fn);

  StepResult run(const StepRequest& request) override;

  /// Task names in the order run() was entered.
  std::vector<std::string> calls() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Script> scripts_;
  std::vector<std::string> calls_;
};

}  // namespace ca
