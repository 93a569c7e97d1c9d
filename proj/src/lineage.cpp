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


#include "ca/lineage.hpp"

#include <algorithm>
#include <deque>

#include "ca/error.hpp"
#include "ca/flow.hpp"
#include "ca/io.hpp"
#include "ca/workspace.hpp"

namespace ca {

using nlohmann::json;

namespace {
constexpr std::string_view kRunPrefix = "run:";
}

std::string to_string(const LineageNode& node) {
  if (const auto* run = std::get_if<RunId>(&node)) return std::string(kRunPrefix) + run->str();
  return std::get<ArtifactId>(node).str();
}

LineageNode parse_lineage_node(std::string_view text) {
  if (text.starts_with(kRunPrefix)) return RunId::parse(text.substr(kRunPrefix.size()));
  return ArtifactId::parse(text);
}

std::string_view to_string(EdgeRole role) noexcept {
  switch (role) {
    case EdgeRole::consumed: return "consumed";
    case EdgeRole::produced: return "produced";
    case EdgeRole::pinned: return "pinned";
  }
  return "consumed";
}

void to_json(json& j, const LineageEdge& e) {
  j = json{{"from", to_string(e.from)}, {"to", to_string(e.to)}, {"role", to_string(e.role)}};
}

void from_json(const json& j, LineageEdge& e) {
  e.from = parse_lineage_node(j.at("from").get<std::string>());
  e.to = parse_lineage_node(j.at("to").get<std::string>());
  auto role = j.at("role").get<std::string>();
  if (role == "consumed") e.role = EdgeRole::consumed;
  else if (role == "produced") e.role = EdgeRole::produced;
  else if (role == "pinned") e.role = EdgeRole::pinned;
  else throw Error(Errc::schema_error, "unknown lineage role '" + role + "'");
}

std::vector<LineageEdge> edges_for_run(const Store& store, const RunRecord& run,
                                       const std::vector<StepOutcome>& outcomes) {
  std::set<ArtifactId> produced(run.result_ids.begin(), run.result_ids.end());
  for (const auto& o : outcomes) {
    for (const auto& [_, id] : o.output_ids) produced.insert(id);
  }
  std::set<LineageEdge> edges;
  for (const auto& o : outcomes) {
    for (const auto& [_, id] : o.input_ids) {
      if (!produced.contains(id)) edges.insert({id, run.run_id, EdgeRole::consumed});
    }
  }
  for (const auto& [_, pin] : run.tuple.pins()) {
    if (auto id = resolve_pin(store, pin)) edges.insert({*id, run.run_id, EdgeRole::pinned});
  }
  for (const auto& id : produced) edges.insert({run.run_id, id, EdgeRole::produced});
  return {edges.begin(), edges.end()};
}

LineageIndex::LineageIndex(const std::vector<LineageEdge>& edges) {
  for (const auto& e : edges) {
    if (e.role == EdgeRole::produced) {
      producers_[std::get<ArtifactId>(e.to)].insert(std::get<RunId>(e.from));
    } else {
      const auto& artifact = std::get<ArtifactId>(e.from);
      const auto& run = std::get<RunId>(e.to);
      users_[artifact].insert(run);
      inputs_[run].insert(artifact);
    }
  }
}

std::set<RunId> LineageIndex::runs_using(const ArtifactId& artifact) const {
  auto it = users_.find(artifact);
  return it == users_.end() ? std::set<RunId>{} : it->second;
}

std::set<LineageNode> LineageIndex::provenance_of(const ArtifactId& artifact) const {
  std::set<LineageNode> seen{artifact};
  std::deque<ArtifactId> queue{artifact};
  while (!queue.empty()) {
    auto current = queue.front();
    queue.pop_front();
    auto producers = producers_.find(current);
    if (producers == producers_.end()) continue;
    for (const auto& run : producers->second) {
      if (!seen.insert(run).second) continue;
      auto inputs = inputs_.find(run);
      if (inputs == inputs_.end()) continue;
      for (const auto& input : inputs->second) {
        if (seen.insert(input).second) queue.push_back(input);
      }
    }
  }
  return seen;
}

void Lineage::refresh_locked() const {
  for (const auto& line : io::read_lines_from(store_.repo().lineage_path(), offset_)) {
    if (line.empty()) continue;
    LineageEdge edge;
    try {
      edge = json::parse(line).get<LineageEdge>();
    } catch (const json::exception& e) {
      throw Error(Errc::integrity_violation, std::string("corrupt lineage log: ") + e.what());
    }
    if (edge_set_.insert(edge).second) edges_.push_back(edge);
  }
}

std::size_t Lineage::append(const std::vector<LineageEdge>& edges) {
  auto guard = store_.repo().lock();
  std::lock_guard lock(mu_);
  refresh_locked();
  std::size_t added = 0;
  for (const auto& edge : edges) {
    if (edge_set_.contains(edge)) continue;
    io::append_line(store_.repo().lineage_path(), json(edge).dump());
    ++added;
  }
  refresh_locked();
  return added;
}

std::size_t Lineage::record_edges(const RunRecord& run, const std::vector<StepOutcome>& outcomes) {
  if (!runs_.find(run.run_id)) {
    throw Error(Errc::dangling_reference, "run " + run.run_id.str() + " is not recorded");
  }
  auto edges = edges_for_run(store_, run, outcomes);
  for (const auto& e : edges) {
    for (const auto* node : {&e.from, &e.to}) {
      if (const auto* id = std::get_if<ArtifactId>(node); id && !store_.contains(*id)) {
        throw Error(Errc::dangling_reference, "lineage edge references missing " + id->str());
      }
    }
  }
  for (const auto& [_, pin] : run.tuple.pins()) {
    if (pin.content && !resolve_pin(store_, pin)) {
      throw Error(Errc::dangling_reference,
                  "pin '" + pin.component + "' content " + pin.content->hex() + " is not in the store");
    }
  }
  return append(edges);
}

std::vector<LineageEdge> Lineage::edges() const {
  std::lock_guard lock(mu_);
  refresh_locked();
  return edges_;
}

std::vector<RunId> Lineage::runs_using(const ArtifactId& artifact) const {
  auto users = LineageIndex(edges()).runs_using(artifact);
  std::vector<std::pair<std::optional<std::string>, RunId>> keyed;
  for (const auto& id : users) {
    auto rec = runs_.find(id);
    keyed.emplace_back(rec ? std::optional(rec->started_at) : std::nullopt, id);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.first.has_value() != b.first.has_value()) return a.first.has_value();
    if (a.first != b.first) return *a.first < *b.first;
    return a.second < b.second;
  });
  std::vector<RunId> out;
  for (auto& [_, id] : keyed) out.push_back(std::move(id));
  return out;
}

std::set<LineageNode> Lineage::provenance_of(const ArtifactId& artifact) const {
  return LineageIndex(edges()).provenance_of(artifact);
}

void to_json(json& j, const ReplayResult& r) {
  auto opt_hash = [](const std::optional<ContentHash>& h) { return h ? json(h->hex()) : json(nullptr); };
  j = json{{"identical", r.identical}, {"replay_run", r.replay.run_id}, {"diverged", json::array()}};
  for (const auto& d : r.diverged) {
    j["diverged"].push_back({{"task", d.task},
                             {"step", d.step},
                             {"slot", d.slot},
                             {"old_hash", opt_hash(d.old_hash)},
                             {"new_hash", opt_hash(d.new_hash)}});
  }
}

namespace {

struct OutputKey {
  std::string task;
  std::string step;
  std::string slot;
  auto operator<=>(const OutputKey&) const = default;
};

std::map<OutputKey, ContentHash> outputs_by_slot(const RunRecord& run) {
  std::map<OutputKey, ContentHash> out;
  for (const auto& o : run.step_outcomes) {
    for (const auto& [slot, id] : o.output_ids) out[{o.task_name(), o.step, slot}] = id.hash;
  }
  return out;
}

void require_input(const Store& store, const ArtifactId& id, const std::string& what) {
  if (!store.contains(id) || !store.verify(id)) {
    throw Error(Errc::missing_input, what + " " + id.str() + " is missing or corrupt");
  }
}

}  // namespace

ReplayResult replay_check(Workspace& ws, const RunId& run_id, StepExecutor& executor,
                          const FlowGraph* flow, std::size_t parallelism) {
  auto original = ws.runs().load(run_id);
  auto& store = ws.store();

  for (const auto& [_, pin] : original.tuple.pins()) {
    if (!pin.content) continue;
    auto id = resolve_pin(store, pin);
    if (!id) {
      throw Error(Errc::missing_input, "pinned " + pin.component + " content " + pin.content->hex() +
                                           " is not in the store");
    }
    require_input(store, *id, "pinned " + pin.component);
  }
  std::set<ArtifactId> produced;
  for (const auto& o : original.step_outcomes) {
    for (const auto& [_, id] : o.output_ids) produced.insert(id);
  }
  for (const auto& o : original.step_outcomes) {
    for (const auto& [slot, id] : o.input_ids) {
      if (!produced.contains(id)) require_input(store, id, "input " + slot + " of " + o.task_name());
    }
  }
  if (original.data_scope.manifest_id) {
    require_input(store, *original.data_scope.manifest_id, "data manifest");
  }

  FlowGraph loaded;
  if (!flow) {
    loaded = ws.load_flow(original);
    flow = &loaded;
  }

  ExecuteOptions options;
  options.kind = RunKind::validation;
  options.scope = original.data_scope;
  options.branch = original.branch;
  options.labels = {{"replay-of", run_id.str()}};
  options.parallelism = parallelism;
  options.flow_id = original.flow_id;

  ReplayResult result;
  result.replay = ws.run_experiment(*flow, original.tuple, executor, options);

  auto before = outputs_by_slot(original);
  auto after = outputs_by_slot(result.replay);
  std::set<OutputKey> keys;
  for (const auto& [k, _] : before) keys.insert(k);
  for (const auto& [k, _] : after) keys.insert(k);
  for (const auto& k : keys) {
    auto b = before.find(k);
    auto a = after.find(k);
    std::optional<ContentHash> old_hash, new_hash;
    if (b != before.end()) old_hash = b->second;
    if (a != after.end()) new_hash = a->second;
    if (old_hash != new_hash) result.diverged.push_back({k.task, k.step, k.slot, old_hash, new_hash});
  }
  result.identical = result.diverged.empty() && original.status == result.replay.status;
  return result;
}

}  // namespace ca
