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

// Shared fixtures: throwaway repositories, the four-step reference flow and
// deterministic scripts for the recording executor.

#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "ca/error.hpp"
#include "ca/executor.hpp"
#include "ca/flow.hpp"
#include "ca/hash.hpp"
#include "ca/io.hpp"
#include "ca/pipeline.hpp"
#include "ca/workspace.hpp"

namespace ca::test {

namespace fs = std::filesystem;

template <typename F>
Errc error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::invalid_argument;  // sentinel: nothing thrown
}

/// Returns the code, failing the current test when nothing was thrown.
#define CA_EXPECT_ERROR(expr, errc)                                   \
  do {                                                                \
    bool ca_thrown_ = false;                                          \
    try {                                                             \
      (void)(expr);                                                   \
    } catch (const ::ca::Error& ca_e_) {                              \
      ca_thrown_ = true;                                              \
      EXPECT_EQ(ca_e_.code(), errc) << ca_e_.what();                  \
    }                                                                 \
    EXPECT_TRUE(ca_thrown_) << #expr " did not throw";                \
  } while (0)

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "ca-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct TestRepo {
  TempDir dir;
  Workspace ws{Repository::init(dir.path() / ".ca")};

  Store& store() { return ws.store(); }
  fs::path root() const { return ws.repo().root(); }
};

inline std::string item_manifest(int n, int offset = 0) {
  std::string out;
  char buf[32];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "item-%04d\n", i + offset);
    out += buf;
  }
  return out;
}

inline std::vector<std::string> item_ids(int n) {
  std::vector<std::string> out;
  char buf[32];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "item-%04d", i);
    out.emplace_back(buf);
  }
  return out;
}

/// Baseline tuple whose data pin points at a stored item manifest.
inline ArtifactVersionTuple baseline_tuple(Store& store, const std::string& data_version = "x1",
                                           int items = 100) {
  auto data = store.put(ArtifactKind::data, item_manifest(items, data_version == "x1" ? 0 : 1000));
  return ArtifactVersionTuple{{"code", "c1", std::nullopt},
                              {"data", data_version, data.hash},
                              {"dependencies", "d1", std::nullopt},
                              {"deployment", "y1", std::nullopt}};
}

/// Four steps: step1 prepares the data, step2 and step3 build a model,
/// step4 scores the prepared data against the model in three partitions and
/// merges the partial scores.
inline constexpr const char* kScoringFlow = R"({
  "steps": [
    {"name": "step1", "command": "prepare {input:raw} > {output:prepared}",
     "inputs": {"raw": {"pin": "data"}}, "outputs": ["prepared"]},
    {"name": "step2", "command": "features {input:raw} > {output:features}",
     "inputs": {"raw": {"pin": "data"}}, "outputs": ["features"]},
    {"name": "step3", "command": "train {input:features} > {output:model}",
     "inputs": {"features": {"step": "step2", "slot": "features"}}, "outputs": ["model"]},
    {"name": "step4", "command": "score --part {partition} {input:prepared} {input:model} > {output:scores}",
     "inputs": {"prepared": {"step": "step1", "slot": "prepared"},
                "model": {"step": "step3", "slot": "model"}},
     "outputs": ["scores"],
     "partition": {"count": 3, "merge_command": "cat {partitions} > {output:scores}"}}
  ],
  "outcomes": [{"step": "step4", "slot": "scores"}],
  "env_whitelist": []
})";

/// Same flow plus an evaluation step that emits a metrics document.
inline constexpr const char* kEvaluatedFlow = R"({
  "steps": [
    {"name": "step1", "command": "prepare {input:raw} {input:__data_manifest} > {output:prepared}",
     "inputs": {"raw": {"pin": "data"}}, "outputs": ["prepared"]},
    {"name": "step4", "command": "score --part {partition} {input:prepared} > {output:scores}",
     "inputs": {"prepared": {"step": "step1", "slot": "prepared"}},
     "outputs": ["scores"],
     "partition": {"count": 3, "merge_command": "cat {partitions} > {output:scores}"}},
    {"name": "evaluate", "command": "evaluate {input:scores} > {output:metrics}",
     "inputs": {"scores": {"step": "step4", "slot": "scores"}}, "outputs": ["metrics"]}
  ],
  "outcomes": [{"step": "step4", "slot": "scores"}, {"step": "evaluate", "slot": "metrics"}],
  "env_whitelist": [],
  "metrics_output": {"step": "evaluate", "slot": "metrics"}
})";

inline std::string read_input(const StepRequest& req, const std::string& slot) {
  return io::read_file(req.inputs.at(slot));
}

inline std::string digest_of_inputs(const StepRequest& req) {
  std::string acc;
  for (const auto& [slot, path] : req.inputs) acc += slot + "=" + ContentHash::of(io::read_file(path)).hex() + ";";
  return ContentHash::of(acc).hex();
}

inline StepResult produce(const std::string& slot, Blob bytes, std::string log = "ok\n") {
  StepResult r;
  r.outputs[slot] = std::move(bytes);
  r.log = std::move(log);
  return r;
}

/// Deterministic scripts: every output is a pure function of the task name
/// and its input bytes. The merge concatenates partitions in index order.
inline void script_pure(RecordingExecutor& ex, const FlowGraph& graph) {
  for (const auto& step : graph.steps) {
    const std::string slot = step.outputs.front();
    ex.script(step.name, [slot](const StepRequest& req) {
      return produce(slot, req.task_name() + ":" + digest_of_inputs(req) + "\n");
    });
    if (step.partition) {
      ex.script(step.name + "[merge]", [slot](const StepRequest& req) {
        std::string merged;
        for (int i = 0; req.inputs.contains(std::string(kPartitionSlotPrefix) + std::to_string(i)); ++i) {
          merged += read_input(req, std::string(kPartitionSlotPrefix) + std::to_string(i));
        }
        return produce(slot, merged);
      });
    }
  }
}

/// Forces partitions of `step` to finish in `order` (a permutation of
/// partition indices). Needs parallelism >= partition count.
class CompletionSequencer {
 public:
  explicit CompletionSequencer(std::vector<int> order) : order_(std::move(order)) {}

  void wait_turn(int partition) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return next_ < order_.size() && order_[next_] == partition; });
  }
  void done() {
    std::lock_guard lock(mu_);
    ++next_;
    finished_.push_back(order_[next_ - 1]);
    cv_.notify_all();
  }
  std::vector<int> finished() const {
    std::lock_guard lock(mu_);
    return finished_;
  }

 private:
  std::vector<int> order_;
  std::size_t next_ = 0;
  std::vector<int> finished_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
};

inline void script_sequenced(RecordingExecutor& ex, const std::string& step, const std::string& slot,
                             int count, CompletionSequencer& seq) {
  for (int p = 0; p < count; ++p) {
    ex.script(step + "[" + std::to_string(p) + "]", [&seq, slot, p](const StepRequest& req) {
      seq.wait_turn(p);
      auto r = produce(slot, req.task_name() + ":" + digest_of_inputs(req) + "\n");
      seq.done();
      return r;
    });
  }
}

/// Metrics-emitting evaluate step for the evaluated flow.
inline void script_metrics(RecordingExecutor& ex, const std::string& metrics_json) {
  ex.script("evaluate", [metrics_json](const StepRequest&) { return produce("metrics", metrics_json); });
}

inline std::vector<std::string> read_lines(const fs::path& p) { return io::read_lines(p); }

}  // namespace ca::test
