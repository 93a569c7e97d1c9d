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

#include "ca/run.hpp"

#include <algorithm>
#include <cstdio>

#include "ca/error.hpp"
#include "ca/io.hpp"

namespace ca {

using nlohmann::json;

RunId RunId::make(const ContentHash& tuple_hash, std::uint64_t sequence) {
  char seq[32];
  std::snprintf(seq, sizeof seq, "%06llu", static_cast<unsigned long long>(sequence));
  return RunId(std::string(tuple_hash.prefix(12)) + "-" + seq);
}

RunId RunId::parse(std::string_view token) {
  auto bad = [&] {
    return Error(Errc::invalid_argument, "malformed run id '" + std::string(token) + "'");
  };
  if (token.size() < 19 || token[12] != '-') throw bad();
  for (std::size_t i = 0; i < token.size(); ++i) {
    char c = token[i];
    if (i < 12 && !((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) throw bad();
    if (i > 12 && !(c >= '0' && c <= '9')) throw bad();
  }
  return RunId(std::string(token));
}

std::uint64_t RunId::sequence() const {
  return token_.size() > 13 ? std::stoull(token_.substr(13)) : 0;
}

std::string_view to_string(RunKind kind) noexcept {
  return kind == RunKind::validation ? "validation" : "release";
}

std::string_view to_string(RunStatus status) noexcept {
  switch (status) {
    case RunStatus::running: return "running";
    case RunStatus::succeeded: return "succeeded";
    case RunStatus::failed: return "failed";
  }
  return "running";
}

std::string StepOutcome::task_name() const {
  if (merge) return step + "[merge]";
  if (partition_index) return step + "[" + std::to_string(*partition_index) + "]";
  return step;
}

void to_json(json& j, const RunId& id) { j = id.str(); }
void from_json(const json& j, RunId& id) { id = RunId::parse(j.get<std::string>()); }

void to_json(json& j, const StepOutcome& o) {
  j = json{{"step", o.step},
           {"partition_index", o.partition_index ? json(*o.partition_index) : json(nullptr)},
           {"merge", o.merge},
           {"exit_code", o.exit_code},
           {"input_ids", o.input_ids},
           {"output_ids", o.output_ids},
           {"log_id", o.log_id},
           {"command_rendered", o.command_rendered},
           {"wall_time_ms", o.wall_time_ms},
           {"env_snapshot_id", o.env_snapshot_id}};
}

void from_json(const json& j, StepOutcome& o) {
  o.step = j.at("step").get<std::string>();
  o.partition_index.reset();
  if (!j.at("partition_index").is_null()) o.partition_index = j.at("partition_index").get<int>();
  o.merge = j.at("merge").get<bool>();
  o.exit_code = j.at("exit_code").get<int>();
  o.input_ids = j.at("input_ids").get<std::map<std::string, ArtifactId>>();
  o.output_ids = j.at("output_ids").get<std::map<std::string, ArtifactId>>();
  o.log_id = j.at("log_id").get<ArtifactId>();
  o.command_rendered = j.at("command_rendered").get<std::string>();
  o.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
  o.env_snapshot_id = j.at("env_snapshot_id").get<ArtifactId>();
}

void to_json(json& j, const DataScope& s) {
  j = json{{"mode", s.mode == DataScope::Mode::full ? "full" : "subset"},
           {"fraction", s.fraction},
           {"seed", s.seed},
           {"manifest_id", s.manifest_id ? json(*s.manifest_id) : json(nullptr)}};
}

void from_json(const json& j, DataScope& s) {
  auto mode = j.at("mode").get<std::string>();
  if (mode != "full" && mode != "subset") throw Error(Errc::schema_error, "bad data scope mode");
  s.mode = mode == "full" ? DataScope::Mode::full : DataScope::Mode::subset;
  s.fraction = j.at("fraction").get<double>();
  s.seed = j.at("seed").get<std::int64_t>();
  s.manifest_id.reset();
  if (!j.at("manifest_id").is_null()) s.manifest_id = j.at("manifest_id").get<ArtifactId>();
}

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

RunKind parse_kind(const std::string& s) {
  if (s == "validation") return RunKind::validation;
  if (s == "release") return RunKind::release;
  throw Error(Errc::schema_error, "bad run kind '" + s + "'");
}

RunStatus parse_status(const std::string& s) {
  if (s == "running") return RunStatus::running;
  if (s == "succeeded") return RunStatus::succeeded;
  if (s == "failed") return RunStatus::failed;
  throw Error(Errc::schema_error, "bad run status '" + s + "'");
}

}  // namespace

void to_json(json& j, const RunRecord& r) {
  j = json{{"run_id", r.run_id},
           {"tuple", r.tuple},
           {"kind", to_string(r.kind)},
           {"branch", r.branch},
           {"started_at", r.started_at},
           {"finished_at", optional_json(r.finished_at)},
           {"status", to_string(r.status)},
           {"step_outcomes", r.step_outcomes},
           {"skipped_steps", r.skipped_steps},
           {"result_ids", r.result_ids},
           {"feedback_id", optional_json(r.feedback_id)},
           {"flow_id", optional_json(r.flow_id)},
           {"data_scope", r.data_scope},
           {"labels", r.labels}};
}

void from_json(const json& j, RunRecord& r) {
  r.run_id = j.at("run_id").get<RunId>();
  r.tuple = j.at("tuple").get<ArtifactVersionTuple>();
  r.kind = parse_kind(j.at("kind").get<std::string>());
  r.branch = j.at("branch").get<std::string>();
  r.started_at = j.at("started_at").get<std::string>();
  r.finished_at.reset();
  if (!j.at("finished_at").is_null()) r.finished_at = j.at("finished_at").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.step_outcomes = j.at("step_outcomes").get<std::vector<StepOutcome>>();
  r.skipped_steps = j.at("skipped_steps").get<std::vector<std::string>>();
  r.result_ids = j.at("result_ids").get<std::vector<ArtifactId>>();
  r.feedback_id.reset();
  if (!j.at("feedback_id").is_null()) r.feedback_id = j.at("feedback_id").get<ArtifactId>();
  r.flow_id.reset();
  if (!j.at("flow_id").is_null()) r.flow_id = j.at("flow_id").get<ArtifactId>();
  r.data_scope = j.at("data_scope").get<DataScope>();
  r.labels = j.at("labels").get<Labels>();
}

ArtifactKind preferred_kind(std::string_view component) noexcept {
  if (component == "code") return ArtifactKind::code;
  if (component == "dependencies") return ArtifactKind::dependency;
  if (component == "deployment") return ArtifactKind::deployment;
  if (component == "test" || component == "tests") return ArtifactKind::test;
  return ArtifactKind::data;
}

std::optional<ArtifactId> resolve_pin(const Store& store, const VersionPin& pin) {
  if (!pin.content) return std::nullopt;
  auto candidates = store.find(*pin.content);
  if (candidates.empty()) return std::nullopt;
  auto want = preferred_kind(pin.component);
  for (const auto& id : candidates) {
    if (id.kind == want) return id;
  }
  return candidates.front();
}

fs::path RunRegistry::path_for(const RunId& id) const {
  return store_.repo().runs_dir() / (id.str() + ".json");
}

RunId RunRegistry::mint(const ArtifactVersionTuple& tuple) {
  auto hash = tuple_hash(tuple);
  std::string prefix(hash.prefix(12));
  const auto& repo = store_.repo();
  if (!Repository::is_initialized(repo.root())) {
    throw Error(Errc::repo_not_initialized, repo.root().string());
  }
  auto lock = repo.lock();
  json counters = json::object();
  if (auto text = io::try_read_file(repo.counters_path()); text && !text->empty()) {
    try {
      counters = json::parse(*text);
    } catch (const json::exception& e) {
      throw Error(Errc::storage_io, std::string("corrupt counters.json: ") + e.what());
    }
  }
  std::uint64_t next = counters.value(prefix, std::uint64_t{0}) + 1;
  counters[prefix] = next;
  io::write_file_atomic(repo.counters_path(), counters.dump(2) + "\n");
  return RunId::make(hash, next);
}

void RunRegistry::check_references(const RunRecord& run) const {
  auto require = [&](const ArtifactId& id, const std::string& what) {
    if (!store_.contains(id)) {
      throw Error(Errc::dangling_reference, what + " " + id.str() + " is not in the store");
    }
  };
  for (const auto& id : run.result_ids) {
    if (id.kind != ArtifactKind::result) {
      throw Error(Errc::dangling_reference, "result " + id.str() + " is not a result artifact");
    }
    require(id, "result");
  }
  for (const auto& o : run.step_outcomes) {
    require(o.log_id, "log of " + o.task_name());
    require(o.env_snapshot_id, "env snapshot of " + o.task_name());
    for (const auto& [slot, id] : o.output_ids) require(id, "output " + slot + " of " + o.task_name());
    for (const auto& [slot, id] : o.input_ids) require(id, "input " + slot + " of " + o.task_name());
  }
  if (run.feedback_id) require(*run.feedback_id, "feedback bundle");
  if (run.flow_id) require(*run.flow_id, "flow manifest");
  if (run.data_scope.manifest_id) require(*run.data_scope.manifest_id, "data manifest");
  for (const auto& [name, pin] : run.tuple.pins()) {
    if (pin.content && store_.find(*pin.content).empty()) {
      throw Error(Errc::dangling_reference,
                  "pin '" + name + "' content " + pin.content->hex() + " is not in the store");
    }
  }
}

void RunRegistry::record(const RunRecord& run) {
  if (run.run_id.str().empty()) throw Error(Errc::invalid_argument, "run record without run id");
  run.tuple.validate();
  if (run.finished_at.has_value() == (run.status == RunStatus::running)) {
    throw Error(Errc::invalid_argument, "status=running iff finished_at is absent");
  }
  if (run.finished_at && *run.finished_at < run.started_at) {
    throw Error(Errc::invalid_argument, "finished_at precedes started_at");
  }
  check_references(run);

  auto lock = store_.repo().lock();
  auto path = path_for(run.run_id);
  json doc = run;
  if (auto existing = io::try_read_file(path)) {
    json prior;
    try {
      prior = json::parse(*existing);
    } catch (const json::exception&) {
      throw Error(Errc::conflict, "unreadable existing record for " + run.run_id.str());
    }
    if (prior == doc) return;
    throw Error(Errc::conflict, "run " + run.run_id.str() + " already recorded with different content");
  }
  io::write_file_atomic(path, doc.dump(2) + "\n");
}

void RunRegistry::attach_feedback(const RunId& id, const ArtifactId& feedback_id) {
  if (!store_.contains(feedback_id)) {
    throw Error(Errc::dangling_reference, "feedback bundle " + feedback_id.str() + " is not in the store");
  }
  auto lock = store_.repo().lock();
  auto run = load(id);
  if (run.feedback_id) {
    if (*run.feedback_id == feedback_id) return;
    throw Error(Errc::conflict, "run " + id.str() + " already has feedback " + run.feedback_id->str());
  }
  run.feedback_id = feedback_id;
  io::write_file_atomic(path_for(id), json(run).dump(2) + "\n");
}

std::optional<RunRecord> RunRegistry::find(const RunId& id) const {
  auto text = io::try_read_file(path_for(id));
  if (!text) return std::nullopt;
  try {
    return json::parse(*text).get<RunRecord>();
  } catch (const json::exception& e) {
    throw Error(Errc::storage_io, "corrupt run record " + id.str() + ": " + e.what());
  }
}

RunRecord RunRegistry::load(const RunId& id) const {
  auto run = find(id);
  if (!run) throw Error(Errc::run_not_found, id.str());
  return *std::move(run);
}

std::vector<RunRecord> RunRegistry::list() const {
  std::vector<RunRecord> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(store_.repo().runs_dir(), ec)) {
    if (entry.path().extension() != ".json") continue;
    RunId id;
    try {
      id = RunId::parse(entry.path().stem().string());
    } catch (const Error&) {
      continue;
    }
    if (auto run = find(id)) out.push_back(*std::move(run));
  }
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.started_at, a.run_id) < std::tie(b.started_at, b.run_id);
  });
  return out;
}

}  // namespace ca
