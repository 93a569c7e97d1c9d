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

#include "ca/feedback.hpp"

#include <set>
#include <sstream>

#include "ca/error.hpp"
#include "ca/executor.hpp"

namespace ca {

using nlohmann::json;

void to_json(json& j, const FeedbackEntry& e) {
  j = json{{"task", e.task},
           {"step", e.step},
           {"partition_index", e.partition_index ? json(*e.partition_index) : json(nullptr)},
           {"merge", e.merge},
           {"log_id", e.log_id},
           {"command_rendered", e.command_rendered},
           {"input_parameters", e.input_parameters},
           {"output_ids", e.output_ids},
           {"telemetry", {{"wall_time_ms", e.wall_time_ms}, {"exit_code", e.exit_code}}},
           {"env_snapshot_id", e.env_snapshot_id}};
}

void from_json(const json& j, FeedbackEntry& e) {
  e.task = j.at("task").get<std::string>();
  e.step = j.at("step").get<std::string>();
  e.partition_index.reset();
  if (!j.at("partition_index").is_null()) e.partition_index = j.at("partition_index").get<int>();
  e.merge = j.at("merge").get<bool>();
  e.log_id = j.at("log_id").get<ArtifactId>();
  e.command_rendered = j.at("command_rendered").get<std::string>();
  e.input_parameters = j.at("input_parameters").get<std::map<std::string, std::string>>();
  e.output_ids = j.at("output_ids").get<std::map<std::string, ArtifactId>>();
  e.wall_time_ms = j.at("telemetry").at("wall_time_ms").get<std::int64_t>();
  e.exit_code = j.at("telemetry").at("exit_code").get<int>();
  e.env_snapshot_id = j.at("env_snapshot_id").get<ArtifactId>();
}

void to_json(json& j, const FeedbackBundle& b) {
  j = json{{"run_id", b.run_id},
           {"engine_version", b.engine_version},
           {"entries", b.entries},
           {"metrics", b.metrics}};
}

void from_json(const json& j, FeedbackBundle& b) {
  b.run_id = j.at("run_id").get<RunId>();
  b.engine_version = j.at("engine_version").get<std::string>();
  b.entries = j.at("entries").get<std::vector<FeedbackEntry>>();
  b.metrics = j.at("metrics").get<MetricMap>();
}

FeedbackBundle build_bundle(const RunRecord& run, const std::vector<StepOutcome>& outcomes) {
  FeedbackBundle bundle;
  bundle.run_id = run.run_id;
  bundle.engine_version = std::string(kEngineVersion);
  for (const auto& o : outcomes) {
    FeedbackEntry e;
    e.task = o.task_name();
    e.step = o.step;
    e.partition_index = o.partition_index;
    e.merge = o.merge;
    e.log_id = o.log_id;
    e.command_rendered = o.command_rendered;
    for (const auto& [slot, id] : o.input_ids) e.input_parameters[slot] = id.str();
    if (o.partition_index) e.input_parameters["partition"] = std::to_string(*o.partition_index);
    e.output_ids = o.output_ids;
    e.wall_time_ms = o.wall_time_ms;
    e.exit_code = o.exit_code;
    e.env_snapshot_id = o.env_snapshot_id;
    bundle.entries.push_back(std::move(e));
  }
  return bundle;
}

MetricMap parse_metrics_document(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::malformed_metrics, e.what());
  }
  if (!doc.is_object()) throw Error(Errc::malformed_metrics, "metrics document must be a JSON object");
  MetricMap out;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_number()) {
      throw Error(Errc::malformed_metrics, "metric '" + key + "' is not a number");
    }
    out[key] = value.get<double>();
  }
  return out;
}

std::string_view to_string(Comparator op) noexcept {
  switch (op) {
    case Comparator::le: return "<=";
    case Comparator::lt: return "<";
    case Comparator::ge: return ">=";
    case Comparator::gt: return ">";
    case Comparator::eq: return "=";
  }
  return "=";
}

std::optional<Comparator> parse_comparator(std::string_view text) noexcept {
  if (text == "<=" || text == "≤") return Comparator::le;
  if (text == "<") return Comparator::lt;
  if (text == ">=" || text == "≥") return Comparator::ge;
  if (text == ">") return Comparator::gt;
  if (text == "=" || text == "==") return Comparator::eq;
  return std::nullopt;
}

bool compare(double observed, Comparator op, double threshold) noexcept {
  switch (op) {
    case Comparator::le: return observed <= threshold;
    case Comparator::lt: return observed < threshold;
    case Comparator::ge: return observed >= threshold;
    case Comparator::gt: return observed > threshold;
    case Comparator::eq: return observed == threshold;
  }
  return false;
}

GatePolicy GatePolicy::parse(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, e.what());
  }
  auto bad = [](const std::string& msg) { return Error(Errc::schema_error, "gate policy: " + msg); };
  if (!doc.is_object() || !doc.contains("constraints") || !doc["constraints"].is_array()) {
    throw bad("expected {\"constraints\": [...]}");
  }
  GatePolicy policy;
  std::set<std::string> seen;
  for (const auto& c : doc["constraints"]) {
    if (!c.is_object() || !c.contains("metric") || !c["metric"].is_string() || !c.contains("op") ||
        !c["op"].is_string() || !c.contains("threshold") || !c["threshold"].is_number()) {
      throw bad("each constraint needs string 'metric', string 'op' and numeric 'threshold'");
    }
    auto op = parse_comparator(c["op"].get<std::string>());
    if (!op) throw bad("unknown comparator '" + c["op"].get<std::string>() + "'");
    auto metric = c["metric"].get<std::string>();
    if (!seen.insert(metric).second) throw bad("metric '" + metric + "' constrained twice");
    policy.constraints.push_back({metric, *op, c["threshold"].get<double>()});
  }
  return policy;
}

namespace {

std::string format_number(double v) {
  return json(v).dump();
}

}  // namespace

GateReport evaluate_gate(const MetricMap& metrics, const GatePolicy& policy) {
  GateReport report;
  for (const auto& c : policy.constraints) {
    GateResult r;
    r.metric = c.metric;
    r.required = std::string(to_string(c.op)) + " " + format_number(c.threshold);
    if (auto it = metrics.find(c.metric); it != metrics.end()) {
      r.observed = it->second;
      r.satisfied = compare(it->second, c.op, c.threshold);
    }
    report.pass = report.pass && r.satisfied;
    report.results.push_back(std::move(r));
  }
  return report;
}

void to_json(json& j, const GateReport& r) {
  j = json{{"pass", r.pass}, {"results", json::array()}};
  for (const auto& res : r.results) {
    j["results"].push_back({{"metric", res.metric},
                            {"observed", res.observed ? json(*res.observed) : json(nullptr)},
                            {"required", res.required},
                            {"satisfied", res.satisfied}});
  }
}

void to_json(json& j, const RunComparison& c) {
  j = json{{"a", c.a}, {"b", c.b}, {"metrics", json::array()}, {"only_in_a", c.only_in_a},
           {"only_in_b", c.only_in_b}, {"tuple_diff", c.tuple_diff}};
  for (const auto& d : c.deltas) {
    j["metrics"].push_back(
        {{"metric", d.metric}, {"value_a", d.value_a}, {"value_b", d.value_b}, {"delta", d.delta}});
  }
}

MetricMap Feedback::extract_metrics(FeedbackBundle& bundle, const ArtifactId& metrics_artifact) const {
  auto metrics = parse_metrics_document(store_.get(metrics_artifact));
  for (const auto& [k, v] : metrics) bundle.metrics[k] = v;
  return metrics;
}

FeedbackBundle Feedback::collect(const RunRecord& run, const std::vector<StepOutcome>& outcomes,
                                 const std::optional<ArtifactId>& metrics_artifact) {
  for (const auto& o : outcomes) {
    for (const auto* id : {&o.log_id, &o.env_snapshot_id}) {
      if (!store_.contains(*id)) {
        throw Error(Errc::dangling_reference, o.task_name() + " references missing " + id->str());
      }
    }
    for (const auto& [slot, id] : o.output_ids) {
      if (!store_.contains(id)) {
        throw Error(Errc::dangling_reference, o.task_name() + " output " + slot + " missing " + id.str());
      }
    }
  }
  auto bundle = build_bundle(run, outcomes);
  if (metrics_artifact) extract_metrics(bundle, *metrics_artifact);
  auto id = store_.put(ArtifactKind::result, json(bundle).dump(2), "application/json",
                       {{"run", run.run_id.str()}, {"role", "feedback"}});
  runs_.attach_feedback(run.run_id, id);
  return bundle;
}

FeedbackBundle Feedback::load_bundle(const RunId& run_id) const {
  auto run = runs_.load(run_id);
  if (!run.feedback_id) throw Error(Errc::missing_feedback, "run " + run_id.str() + " has no feedback bundle");
  try {
    return json::parse(store_.get(*run.feedback_id)).get<FeedbackBundle>();
  } catch (const json::exception& e) {
    throw Error(Errc::integrity_violation, "unreadable feedback bundle for " + run_id.str() + ": " + e.what());
  }
}

RunComparison Feedback::compare_runs(const RunId& a, const RunId& b) const {
  auto run_a = runs_.load(a);
  auto run_b = runs_.load(b);
  if (!aligned(run_a.tuple, run_b.tuple)) {
    throw Error(Errc::not_aligned, "runs " + a.str() + " and " + b.str() + " pin different component sets");
  }
  auto bundle_a = load_bundle(a);
  auto bundle_b = load_bundle(b);

  RunComparison out;
  out.a = a;
  out.b = b;
  out.tuple_diff = diff_tuples(run_a.tuple, run_b.tuple);
  for (const auto& [metric, va] : bundle_a.metrics) {
    if (auto it = bundle_b.metrics.find(metric); it != bundle_b.metrics.end()) {
      out.deltas.push_back({metric, va, it->second, it->second - va});
    } else {
      out.only_in_a[metric] = va;
    }
  }
  for (const auto& [metric, vb] : bundle_b.metrics) {
    if (!bundle_a.metrics.contains(metric)) out.only_in_b[metric] = vb;
  }
  return out;
}

}  // namespace ca
