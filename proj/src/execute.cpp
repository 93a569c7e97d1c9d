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

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "ca/error.hpp"
#include "ca/flow.hpp"
#include "ca/io.hpp"
#include "placeholders.hpp"

namespace ca {
namespace {

std::string join_messages(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.kind + ": " + v.message;
  }
  return out;
}

struct Task {
  const StepSpec* spec = nullptr;
  std::optional<int> partition;
  bool merge = false;
  std::vector<std::size_t> dependents;
  int pending = 0;
  enum class State { waiting, ready, running, done, failed } state = State::waiting;

  std::string name() const {
    if (merge) return spec->name + "[merge]";
    if (partition) return spec->name + "[" + std::to_string(*partition) + "]";
    return spec->name;
  }
  std::string dir_name() const {
    if (merge) return spec->name + ".merge";
    if (partition) return spec->name + ".p" + std::to_string(*partition);
    return spec->name;
  }
};

class FlowRun {
 public:
  FlowRun(RunRegistry& runs, const FlowGraph& graph, const ArtifactVersionTuple& tuple,
          StepExecutor& executor, const ExecuteOptions& options)
      : runs_(runs), store_(runs.store()), graph_(graph), tuple_(tuple), executor_(executor),
        options_(options) {}

  RunRecord run() {
    if (auto violations = validate(graph_); !violations.empty()) {
      bool cyclic = std::any_of(violations.begin(), violations.end(),
                                [](const Violation& v) { return v.kind == "cycle"; });
      throw Error(cyclic ? Errc::cycle : Errc::schema_error, join_messages(violations));
    }
    tuple_.validate();
    resolve_external_inputs();
    build_tasks();

    RunRecord record;
    record.started_at = io::now_rfc3339();
    record.run_id = runs_.mint(tuple_);
    record.tuple = tuple_;
    record.kind = options_.kind;
    record.branch = options_.branch;
    record.flow_id = options_.flow_id;
    record.data_scope = options_.scope;
    record.labels = options_.labels;
    run_id_ = record.run_id;
    work_root_ = store_.repo().work_dir() / run_id_.str();

    schedule();

    std::error_code ec;
    fs::remove_all(work_root_, ec);

    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (outcomes_[i]) record.step_outcomes.push_back(*outcomes_[i]);
    }
    std::set<std::string> skipped;
    for (const auto& step_name : order_) {
      for (const auto& t : tasks_) {
        if (t.spec->name == step_name && t.state != Task::State::done &&
            t.state != Task::State::failed) {
          if (skipped.insert(step_name).second) record.skipped_steps.push_back(step_name);
        }
      }
    }
    for (const auto& outcome : graph_.outcomes) {
      if (auto it = produced_.find(outcome); it != produced_.end() &&
          std::find(record.result_ids.begin(), record.result_ids.end(), it->second) ==
              record.result_ids.end()) {
        record.result_ids.push_back(it->second);
      }
    }
    record.status = failed_ ? RunStatus::failed : RunStatus::succeeded;
    record.finished_at = std::max(io::now_rfc3339(), record.started_at);
    runs_.record(record);

    if (!infra_error_.empty()) {
      throw ExecutorFailure("run " + record.run_id.str() + ": " + infra_error_, record);
    }
    return record;
  }

 private:
  void resolve_external_inputs() {
    for (const auto& step : graph_.steps) {
      for (const auto& [slot, ref] : step.inputs) {
        if (const auto* art = std::get_if<ExternalArtifact>(&ref)) {
          if (!store_.contains(art->id)) {
            throw Error(Errc::unresolved_input, "input '" + slot + "' of '" + step.name + "': " +
                                                    art->id.str() + " is not in the store");
          }
          external_[ref] = art->id;
        } else if (const auto* pin_ref = std::get_if<PinnedComponent>(&ref)) {
          const auto* pin = tuple_.find(pin_ref->component);
          if (!pin || !pin->content) {
            throw Error(Errc::unresolved_input, "input '" + slot + "' of '" + step.name +
                                                    "': tuple has no content-hashed pin '" +
                                                    pin_ref->component + "'");
          }
          auto chosen = resolve_pin(store_, *pin);
          if (!chosen) {
            throw Error(Errc::unresolved_input, "pin '" + pin_ref->component + "' content " +
                                                    pin->content->hex() + " is not in the store");
          }
          external_[ref] = *chosen;
        }
      }
    }
    if (options_.scope.manifest_id && !store_.contains(*options_.scope.manifest_id)) {
      throw Error(Errc::unresolved_input,
                  "data manifest " + options_.scope.manifest_id->str() + " is not in the store");
    }
  }

  void build_tasks() {
    order_ = topo_order(graph_);
    std::map<std::string, std::size_t> final_task;
    for (const auto& name : order_) {
      const StepSpec* spec = graph_.find(name);
      std::set<std::size_t> deps;
      for (const auto& [_, ref] : spec->inputs) {
        if (const auto* up = std::get_if<SlotRef>(&ref)) deps.insert(final_task.at(up->step));
      }
      auto add = [&](std::optional<int> partition, bool merge, const std::set<std::size_t>& on) {
        Task t;
        t.spec = spec;
        t.partition = partition;
        t.merge = merge;
        t.pending = static_cast<int>(on.size());
        tasks_.push_back(std::move(t));
        std::size_t idx = tasks_.size() - 1;
        for (auto d : on) tasks_[d].dependents.push_back(idx);
        return idx;
      };
      if (spec->partition) {
        std::set<std::size_t> parts;
        for (int p = 0; p < spec->partition->count; ++p) parts.insert(add(p, false, deps));
        final_task[name] = add(std::nullopt, true, parts);
      } else {
        final_task[name] = add(std::nullopt, false, deps);
      }
    }
    outcomes_.resize(tasks_.size());
  }

  void schedule() {
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (tasks_[i].pending == 0) {
        tasks_[i].state = Task::State::ready;
        ready_.insert(i);
      }
    }
    std::size_t workers = std::clamp<std::size_t>(options_.parallelism, 1, std::max<std::size_t>(tasks_.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back([this] { worker(); });
  }

  void worker() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [&] { return (!ready_.empty() && !failed_) || running_ == 0; });
      if (ready_.empty() || failed_) {
        if (running_ == 0) {
          cv_.notify_all();
          return;
        }
        continue;
      }
      std::size_t idx = *ready_.begin();
      ready_.erase(ready_.begin());
      tasks_[idx].state = Task::State::running;
      ++running_;
      lock.unlock();
      StepOutcome outcome = run_task(idx);
      lock.lock();
      --running_;
      bool ok = outcome.succeeded();
      outcomes_[idx] = std::move(outcome);
      tasks_[idx].state = ok ? Task::State::done : Task::State::failed;
      if (ok) {
        for (auto d : tasks_[idx].dependents) {
          if (--tasks_[d].pending == 0) {
            tasks_[d].state = Task::State::ready;
            ready_.insert(d);
          }
        }
      } else {
        failed_ = true;
      }
      cv_.notify_all();
    }
  }

  std::map<std::string, std::string> whitelisted_env() const {
    std::map<std::string, std::string> env;
    for (const auto& key : graph_.env_whitelist) {
      if (options_.environment) {
        if (auto it = options_.environment->find(key); it != options_.environment->end()) {
          env[key] = it->second;
        }
      } else if (const char* v = std::getenv(key.c_str())) {
        env[key] = v;
      }
    }
    return env;
  }

  void materialize(const fs::path& dir, const std::string& slot, const ArtifactId& id,
                   StepRequest& request, StepOutcome& outcome) {
    auto path = dir / "in" / slot;
    io::write_file_atomic(path, store_.get(id));
    request.inputs[slot] = path;
    outcome.input_ids[slot] = id;
  }

  StepOutcome run_task(std::size_t idx) {
    const Task& task = tasks_[idx];
    const StepSpec& spec = *task.spec;
    StepOutcome outcome;
    outcome.step = spec.name;
    outcome.partition_index = task.partition;
    outcome.merge = task.merge;

    StepRequest request;
    request.step = spec.name;
    request.partition_index = task.partition;
    request.merge = task.merge;
    request.outputs = spec.outputs;
    request.env = whitelisted_env();
    request.workdir = work_root_ / task.dir_name();

    auto started = std::chrono::steady_clock::now();
    StepResult result;
    std::string failure;
    bool infra = false;
    try {
      fs::create_directories(request.workdir / "in");
      fs::create_directories(request.workdir / "out");
      for (const auto& [slot, ref] : spec.inputs) {
        if (task.merge) break;
        ArtifactId id;
        if (const auto* up = std::get_if<SlotRef>(&ref)) {
          std::lock_guard guard(mu_);
          id = produced_.at(*up);
        } else {
          id = external_.at(ref);
        }
        materialize(request.workdir, slot, id, request, outcome);
      }
      if (options_.scope.manifest_id && !task.merge) {
        materialize(request.workdir, std::string(kDataManifestSlot), *options_.scope.manifest_id,
                    request, outcome);
      }
      std::string partition_list;
      if (task.merge) {
        std::vector<ArtifactId> parts;
        {
          std::lock_guard guard(mu_);
          parts = partition_outputs_.at(spec.name);
        }
        for (std::size_t p = 0; p < parts.size(); ++p) {
          auto slot = std::string(kPartitionSlotPrefix) + std::to_string(p);
          materialize(request.workdir, slot, parts[p], request, outcome);
          if (p) partition_list += ' ';
          partition_list += "in/" + slot;
        }
      }
      const std::string& tmpl = task.merge ? spec.partition->merge_command : spec.command;
      request.command = render_template(tmpl, [&](const Placeholder& ph) -> std::string {
        switch (ph.kind) {
          case Placeholder::Kind::input: return "in/" + ph.slot;
          case Placeholder::Kind::output: return "out/" + ph.slot;
          case Placeholder::Kind::partition: return std::to_string(task.partition.value_or(0));
          case Placeholder::Kind::partitions: return partition_list;
        }
        return {};
      });
      outcome.command_rendered = request.command;
      result = executor_.run(request);
    } catch (const Error& e) {
      failure = e.what();
      infra = e.code() != Errc::missing_output;
    } catch (const std::exception& e) {
      failure = e.what();
      infra = true;
    }
    outcome.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();

    if (!failure.empty()) {
      result.exit_code = -1;
      result.outputs.clear();
      if (!result.log.empty() && result.log.back() != '\n') result.log += '\n';
      result.log += failure + "\n";
      if (result.env_snapshot.empty()) result.env_snapshot = render_env_snapshot(request.env);
    }
    outcome.exit_code = result.exit_code;

    Labels base{{"run", run_id_.str()}, {"step", outcome.task_name()}};
    try {
      auto log_labels = base;
      log_labels["role"] = "log";
      outcome.log_id = store_.put(ArtifactKind::result, result.log, "text/plain", log_labels);
      auto env_labels = base;
      env_labels["role"] = "env-snapshot";
      outcome.env_snapshot_id =
          store_.put(ArtifactKind::result, result.env_snapshot, "text/plain", env_labels);
      if (outcome.exit_code == 0) {
        for (const auto& slot : spec.outputs) {
          bool is_outcome = !task.partition &&
                            std::find(graph_.outcomes.begin(), graph_.outcomes.end(),
                                      SlotRef{spec.name, slot}) != graph_.outcomes.end();
          auto labels = base;
          labels["slot"] = slot;
          outcome.output_ids[slot] =
              store_.put(is_outcome ? ArtifactKind::result : ArtifactKind::data,
                         result.outputs.at(slot), "application/octet-stream", labels);
        }
      }
    } catch (const std::exception& e) {
      // storage failure while recording: the task cannot count as succeeded
      infra = true;
      failure = e.what();
      outcome.exit_code = -1;
      outcome.output_ids.clear();
    }

    std::error_code ec;
    fs::remove_all(request.workdir, ec);

    std::lock_guard guard(mu_);
    if (infra && infra_error_.empty()) infra_error_ = outcome.task_name() + ": " + failure;
    if (outcome.exit_code == 0) {
      if (task.partition) {
        auto& parts = partition_outputs_[spec.name];
        parts.resize(static_cast<std::size_t>(spec.partition->count));
        parts[static_cast<std::size_t>(*task.partition)] = outcome.output_ids.at(spec.outputs.front());
      } else {
        for (const auto& [slot, id] : outcome.output_ids) produced_[SlotRef{spec.name, slot}] = id;
      }
    }
    return outcome;
  }

  RunRegistry& runs_;
  Store& store_;
  const FlowGraph& graph_;
  const ArtifactVersionTuple& tuple_;
  StepExecutor& executor_;
  const ExecuteOptions& options_;

  RunId run_id_;
  fs::path work_root_;
  std::vector<std::string> order_;
  std::map<InputRef, ArtifactId> external_;
  std::vector<Task> tasks_;
  std::vector<std::optional<StepOutcome>> outcomes_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::set<std::size_t> ready_;
  int running_ = 0;
  bool failed_ = false;
  std::string infra_error_;
  std::map<SlotRef, ArtifactId> produced_;
  std::map<std::string, std::vector<ArtifactId>> partition_outputs_;
};

}  // namespace

RunRecord execute(RunRegistry& runs, const FlowGraph& graph, const ArtifactVersionTuple& tuple,
                  StepExecutor& executor, const ExecuteOptions& options) {
  return FlowRun(runs, graph, tuple, executor, options).run();
}

}  // namespace ca
