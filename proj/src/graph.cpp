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

// Structural analysis of flow graphs.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ca/error.hpp"
#include "ca/flow.hpp"

namespace ca {
namespace {

using Adjacency = std::map<std::string, std::set<std::string>>;

bool declares_output(const StepSpec& step, const std::string& slot) {
  return std::find(step.outputs.begin(), step.outputs.end(), slot) != step.outputs.end();
}

// producer -> consumers, over references that resolve to a known step.
Adjacency dependency_edges(const FlowGraph& graph) {
  Adjacency adj;
  for (const auto& step : graph.steps) adj[step.name];
  for (const auto& step : graph.steps) {
    for (const auto& [_, ref] : step.inputs) {
      if (const auto* up = std::get_if<SlotRef>(&ref); up && adj.contains(up->step)) {
        adj[up->step].insert(step.name);
      }
    }
  }
  return adj;
}

// Tarjan; returns components that contain a cycle, members sorted.
std::vector<std::vector<std::string>> cyclic_components(const Adjacency& adj) {
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  std::vector<std::vector<std::string>> out;
  int counter = 0;

  std::function<void(const std::string&)> connect = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& w : adj.at(v)) {
      if (!index.contains(w)) {
        connect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.contains(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::string> component;
      std::string w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack.erase(w);
        component.push_back(w);
      } while (w != v);
      bool self_loop = adj.at(v).contains(v);
      if (component.size() > 1 || self_loop) {
        std::sort(component.begin(), component.end());
        out.push_back(std::move(component));
      }
    }
  };
  for (const auto& [v, _] : adj) {
    if (!index.contains(v)) connect(v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<Violation> validate(const FlowGraph& graph) {
  std::vector<Violation> out;

  std::map<std::string, int> name_count;
  for (const auto& step : graph.steps) ++name_count[step.name];
  for (const auto& [name, n] : name_count) {
    if (n > 1) {
      out.push_back({"duplicate-step", "step '" + name + "' is defined " + std::to_string(n) + " times",
                     {name}});
    }
  }

  for (const auto& step : graph.steps) {
    for (const auto& [slot, ref] : step.inputs) {
      const auto* up = std::get_if<SlotRef>(&ref);
      if (!up) continue;
      const auto* producer = graph.find(up->step);
      if (!producer) {
        out.push_back({"dangling-reference",
                       "input '" + slot + "' of '" + step.name + "' names unknown step '" + up->step + "'",
                       {step.name}});
      } else if (!declares_output(*producer, up->slot)) {
        out.push_back({"dangling-reference",
                       "input '" + slot + "' of '" + step.name + "' names unknown slot '" +
                           up->step + "." + up->slot + "'",
                       {step.name, up->step}});
      }
    }
  }

  auto check_slot = [&](const SlotRef& ref, const std::string& what) {
    const auto* producer = graph.find(ref.step);
    if (!producer || !declares_output(*producer, ref.slot)) {
      out.push_back({"unknown-outcome", what + " '" + ref.step + "." + ref.slot + "' is not produced by any step",
                     {ref.step}});
    }
  };
  for (const auto& outcome : graph.outcomes) check_slot(outcome, "outcome");
  if (graph.metrics_output) check_slot(*graph.metrics_output, "metrics_output");

  for (auto& component : cyclic_components(dependency_edges(graph))) {
    out.push_back({"cycle", "dependency cycle among [" + join(component, ", ") + "]", component});
  }
  return out;
}

std::vector<std::string> topo_order(const FlowGraph& graph) {
  auto adj = dependency_edges(graph);
  std::map<std::string, int> indegree;
  for (const auto& [v, _] : adj) indegree[v];
  for (const auto& [_, targets] : adj) {
    for (const auto& w : targets) ++indegree[w];
  }
  std::set<std::string> ready;
  for (const auto& [v, d] : indegree) {
    if (d == 0) ready.insert(v);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (const auto& w : adj[v]) {
      if (--indegree[w] == 0) ready.insert(w);
    }
  }
  if (order.size() != adj.size()) {
    std::vector<std::string> stuck;
    for (const auto& [v, d] : indegree) {
      if (d > 0) stuck.push_back(v);
    }
    throw Error(Errc::cycle, "flow graph has a cycle through [" + join(stuck, ", ") + "]");
  }
  return order;
}

std::set<InputRef> critical_artifacts(const FlowGraph& graph) {
  auto order = topo_order(graph);
  std::set<SlotRef> outcome_slots(graph.outcomes.begin(), graph.outcomes.end());

  // consumers of each (step, slot)
  std::map<SlotRef, std::vector<std::string>> consumers;
  for (const auto& step : graph.steps) {
    for (const auto& [_, ref] : step.inputs) {
      if (const auto* up = std::get_if<SlotRef>(&ref)) consumers[*up].push_back(step.name);
    }
  }

  std::map<std::string, bool> reaches;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto* step = graph.find(*it);
    bool r = false;
    for (const auto& slot : step->outputs) {
      SlotRef here{step->name, slot};
      if (outcome_slots.contains(here)) r = true;
      for (const auto& c : consumers[here]) r = r || reaches[c];
    }
    reaches[step->name] = r;
  }

  std::set<InputRef> out;
  for (const auto& step : graph.steps) {
    if (!reaches[step.name]) continue;
    for (const auto& [_, ref] : step.inputs) {
      if (is_external(ref)) out.insert(ref);
    }
  }
  return out;
}

std::string to_dot(const FlowGraph& graph) {
  std::ostringstream dot;
  dot << "digraph flow {\n  rankdir=LR;\n";
  std::set<std::string> externals;
  for (const auto& step : graph.steps) {
    std::string label = step.name;
    if (step.partition) {
      label += "\\npartitioned x" + std::to_string(step.partition->count) + " + merge";
    }
    dot << "  " << dot_quote(step.name) << " [shape=box, label=\"" << label << "\"];\n";
    for (const auto& [_, ref] : step.inputs) {
      if (is_external(ref)) externals.insert(describe(ref));
    }
  }
  for (const auto& ext : externals) {
    dot << "  " << dot_quote(ext) << " [shape=note, style=filled, fillcolor=lightgrey];\n";
  }
  for (const auto& step : graph.steps) {
    for (const auto& [slot, ref] : step.inputs) {
      if (const auto* up = std::get_if<SlotRef>(&ref)) {
        dot << "  " << dot_quote(up->step) << " -> " << dot_quote(step.name)
            << " [label=" << dot_quote(up->slot + " -> " + slot) << "];\n";
      } else {
        dot << "  " << dot_quote(describe(ref)) << " -> " << dot_quote(step.name)
            << " [label=" << dot_quote(slot) << "];\n";
      }
    }
  }
  for (const auto& outcome : graph.outcomes) {
    auto node = "outcome:" + outcome.step + "." + outcome.slot;
    dot << "  " << dot_quote(node) << " [shape=doublecircle, label="
        << dot_quote(outcome.step + "." + outcome.slot) << "];\n";
    dot << "  " << dot_quote(outcome.step) << " -> " << dot_quote(node) << ";\n";
  }
  dot << "}\n";
  return dot.str();
}

}  // namespace ca
