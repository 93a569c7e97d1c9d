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
#include <set>

#include "ca/error.hpp"
#include "ca/flow.hpp"
#include "placeholders.hpp"

namespace ca {

using nlohmann::json;

bool is_external(const InputRef& ref) noexcept { return !std::holds_alternative<SlotRef>(ref); }

std::string describe(const InputRef& ref) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ExternalArtifact>) {
          return "artifact:" + r.id.str();
        } else if constexpr (std::is_same_v<T, PinnedComponent>) {
          return "pin:" + r.component;
        } else {
          return r.step + "." + r.slot;
        }
      },
      ref);
}

const StepSpec* FlowGraph::find(std::string_view name) const {
  auto it = std::find_if(steps.begin(), steps.end(),
                         [&](const StepSpec& s) { return s.name == name; });
  return it == steps.end() ? nullptr : &*it;
}

namespace {

[[noreturn]] void schema(const std::string& msg) { throw Error(Errc::schema_error, msg); }

void only_keys(const json& obj, std::initializer_list<std::string_view> allowed,
               const std::string& where) {
  if (!obj.is_object()) schema(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema("unknown field '" + key + "' in " + where);
    }
  }
}

std::string required_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema("missing '" + std::string(key) + "' in " + where);
  if (!it->is_string()) schema("'" + std::string(key) + "' in " + where + " must be a string");
  return it->get<std::string>();
}

bool is_slot_name(std::string_view s) {
  return is_valid_component_name(s) && !s.starts_with("__");
}

SlotRef parse_slot_ref(const json& j, const std::string& where) {
  only_keys(j, {"step", "slot"}, where);
  return SlotRef{required_string(j, "step", where), required_string(j, "slot", where)};
}

InputRef parse_input_ref(const json& j, const std::string& where) {
  if (!j.is_object()) schema(where + " must be an object");
  if (j.contains("artifact")) {
    only_keys(j, {"artifact"}, where);
    try {
      return ExternalArtifact{ArtifactId::parse(required_string(j, "artifact", where))};
    } catch (const Error& e) {
      schema(where + ": " + e.what());
    }
  }
  if (j.contains("pin")) {
    only_keys(j, {"pin"}, where);
    auto component = required_string(j, "pin", where);
    if (!is_valid_component_name(component)) schema(where + ": bad component '" + component + "'");
    return PinnedComponent{component};
  }
  if (j.contains("step")) return parse_slot_ref(j, where);
  schema(where + " needs one of 'artifact', 'pin', or 'step'+'slot'");
}

void check_template(const std::string& tmpl, const StepSpec& step, bool is_merge,
                    const std::string& where) {
  for (const auto& ph : scan_placeholders(tmpl)) {
    switch (ph.kind) {
      case Placeholder::Kind::input:
        if (ph.slot != kDataManifestSlot && !step.inputs.contains(ph.slot)) {
          schema(where + " references undeclared input slot '" + ph.slot + "'");
        }
        break;
      case Placeholder::Kind::output:
        if (std::find(step.outputs.begin(), step.outputs.end(), ph.slot) == step.outputs.end()) {
          schema(where + " references undeclared output slot '" + ph.slot + "'");
        }
        break;
      case Placeholder::Kind::partition:
        if (is_merge || !step.partition) schema(where + " uses {partition} outside a partition task");
        break;
      case Placeholder::Kind::partitions:
        if (!is_merge) schema(where + " uses {partitions} outside a merge command");
        break;
    }
  }
}

StepSpec parse_step(const json& j, std::size_t index) {
  std::string where = "steps[" + std::to_string(index) + "]";
  only_keys(j, {"name", "command", "inputs", "outputs", "partition"}, where);
  StepSpec step;
  step.name = required_string(j, "name", where);
  if (!is_valid_component_name(step.name)) schema(where + ": step name must match [a-z0-9_-]+");
  where = "step '" + step.name + "'";
  step.command = required_string(j, "command", where);
  if (step.command.empty()) schema(where + ": empty command");

  if (auto it = j.find("inputs"); it != j.end()) {
    if (!it->is_object()) schema(where + ": 'inputs' must be an object");
    for (const auto& [slot, ref] : it->items()) {
      if (!is_slot_name(slot)) schema(where + ": bad input slot name '" + slot + "'");
      step.inputs.emplace(slot, parse_input_ref(ref, where + " input '" + slot + "'"));
    }
  }
  if (auto it = j.find("outputs"); it != j.end()) {
    if (!it->is_array()) schema(where + ": 'outputs' must be an array");
    std::set<std::string> seen;
    for (const auto& o : *it) {
      if (!o.is_string() || !is_slot_name(o.get<std::string>())) {
        schema(where + ": bad output slot name");
      }
      if (!seen.insert(o.get<std::string>()).second) {
        schema(where + ": duplicate output slot '" + o.get<std::string>() + "'");
      }
      step.outputs.push_back(o.get<std::string>());
    }
  }
  if (auto it = j.find("partition"); it != j.end()) {
    only_keys(*it, {"count", "merge_command"}, where + " partition");
    auto count = it->find("count");
    if (count == it->end() || !count->is_number_integer() || count->get<long long>() < 1 ||
        count->get<long long>() > 100000) {
      schema(where + ": partition count must be a positive integer");
    }
    PartitionSpec spec;
    spec.count = count->get<int>();
    spec.merge_command = required_string(*it, "merge_command", where + " partition");
    if (spec.merge_command.empty()) schema(where + ": empty merge_command");
    if (step.outputs.size() != 1) {
      schema(where + ": a partitioned step must declare exactly one output slot for its merge");
    }
    step.partition = std::move(spec);
  }
  check_template(step.command, step, false, where + " command");
  if (step.partition) check_template(step.partition->merge_command, step, true, where + " merge_command");
  return step;
}

}  // namespace

FlowGraph parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, e.what());
  }
  only_keys(doc, {"steps", "outcomes", "env_whitelist", "metrics_output"}, "manifest");
  FlowGraph graph;

  auto steps = doc.find("steps");
  if (steps == doc.end() || !steps->is_array()) schema("manifest needs a 'steps' array");
  for (std::size_t i = 0; i < steps->size(); ++i) graph.steps.push_back(parse_step((*steps)[i], i));

  auto outcomes = doc.find("outcomes");
  if (outcomes == doc.end() || !outcomes->is_array() || outcomes->empty()) {
    schema("manifest needs a nonempty 'outcomes' array");
  }
  for (std::size_t i = 0; i < outcomes->size(); ++i) {
    graph.outcomes.push_back(parse_slot_ref((*outcomes)[i], "outcomes[" + std::to_string(i) + "]"));
  }

  if (auto it = doc.find("env_whitelist"); it != doc.end()) {
    if (!it->is_array()) schema("'env_whitelist' must be an array");
    for (const auto& v : *it) {
      if (!v.is_string() || v.get<std::string>().empty() ||
          v.get<std::string>().find('=') != std::string::npos) {
        schema("'env_whitelist' entries must be variable names");
      }
      graph.env_whitelist.push_back(v.get<std::string>());
    }
    std::sort(graph.env_whitelist.begin(), graph.env_whitelist.end());
    graph.env_whitelist.erase(std::unique(graph.env_whitelist.begin(), graph.env_whitelist.end()),
                              graph.env_whitelist.end());
  }
  if (auto it = doc.find("metrics_output"); it != doc.end()) {
    graph.metrics_output = parse_slot_ref(*it, "metrics_output");
  }
  return graph;
}

}  // namespace ca
