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


#include "ca/pipeline.hpp"

#include <cmath>

#include "ca/error.hpp"
#include "ca/hash.hpp"
#include "ca/io.hpp"

namespace ca {

using nlohmann::json;

std::string_view to_string(Source source) noexcept {
  switch (source) {
    case Source::code: return "code";
    case Source::data: return "data";
    case Source::dependencies: return "dependencies";
    case Source::deployment: return "deployment";
  }
  return "data";
}

std::optional<Source> parse_source(std::string_view text) noexcept {
  for (auto s : {Source::code, Source::data, Source::dependencies, Source::deployment}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(Decision d) noexcept {
  return d == Decision::approved ? "approved" : "rejected";
}

void to_json(json& j, const ChangeEvent& e) {
  j = json{{"event_id", e.event_id}, {"source", to_string(e.source)}, {"ref", e.ref},
           {"new_pin", e.new_pin},   {"at", e.at}};
}

void from_json(const json& j, ChangeEvent& e) {
  e.event_id = j.at("event_id").get<std::string>();
  auto src = parse_source(j.at("source").get<std::string>());
  if (!src) throw Error(Errc::malformed_event, "unknown source");
  e.source = *src;
  e.ref = j.at("ref").get<std::string>();
  e.new_pin = j.at("new_pin").get<VersionPin>();
  e.at = j.value("at", "");
}

void to_json(json& j, const BranchPins& b) {
  j = json{{"branch", b.branch},
           {"pins", b.pins},
           {"last_release_run", b.last_release_run ? json(*b.last_release_run) : json(nullptr)},
           {"result_refs", b.result_refs}};
}

void from_json(const json& j, BranchPins& b) {
  b.branch = j.at("branch").get<std::string>();
  b.pins = j.at("pins").get<ArtifactVersionTuple>();
  b.last_release_run.reset();
  if (!j.at("last_release_run").is_null()) b.last_release_run = j.at("last_release_run").get<RunId>();
  b.result_refs = j.at("result_refs").get<std::vector<ArtifactId>>();
}

void to_json(json& j, const ValidationPlan& p) {
  j = json{{"event_id", p.event_id},
           {"branch", p.branch},
           {"kind", "validation"},
           {"base", p.base},
           {"tuple", p.tuple},
           {"tuple_hash", tuple_hash(p.tuple).hex()},
           {"changes", diff_tuples(p.base, p.tuple)},
           {"subset_fraction", p.subset_fraction},
           {"subset_seed", p.subset_seed}};
}

void from_json(const json& j, ValidationPlan& p) {
  p.event_id = j.at("event_id").get<std::string>();
  p.branch = j.at("branch").get<std::string>();
  p.base = j.at("base").get<ArtifactVersionTuple>();
  p.tuple = j.at("tuple").get<ArtifactVersionTuple>();
  p.subset_fraction = j.at("subset_fraction").get<double>();
  p.subset_seed = j.at("subset_seed").get<std::int64_t>();
}

void to_json(json& j, const PromotionRequest& p) {
  j = json{{"run_id", p.run_id}, {"approver", p.approver}, {"decision", to_string(p.decision)},
           {"reason", p.reason}, {"at", p.at}};
}

void from_json(const json& j, PromotionRequest& p) {
  p.run_id = j.at("run_id").get<RunId>();
  p.approver = j.at("approver").get<std::string>();
  auto d = j.at("decision").get<std::string>();
  if (d != "approved" && d != "rejected") throw Error(Errc::schema_error, "bad decision '" + d + "'");
  p.decision = d == "approved" ? Decision::approved : Decision::rejected;
  p.reason = j.at("reason").get<std::string>();
  p.at = j.at("at").get<std::string>();
}

ArtifactVersionTuple resolve_tuple(const ChangeEvent& event, const BranchPins& current) {
  for (auto c : ArtifactVersionTuple::kBaseline) {
    if (!current.pins.find(c)) {
      throw Error(Errc::incomplete_pins,
                  "branch '" + current.branch + "' has no pin for '" + std::string(c) + "'");
    }
  }
  auto tuple = current.pins;
  tuple.set(event.new_pin);
  return tuple;
}

namespace {

std::uint64_t be64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

std::array<std::uint8_t, 32> seeded_digest(std::int64_t seed, std::string_view id) {
  std::string buf(8, '\0');
  auto u = static_cast<std::uint64_t>(seed);
  for (int i = 7; i >= 0; --i, u >>= 8) buf[i] = static_cast<char>(u & 0xff);
  buf.append(id);
  return sha256(buf);
}

}  // namespace

std::vector<std::string> subset_select(const std::vector<std::string>& manifest, double fraction,
                                       std::int64_t seed) {
  if (manifest.empty()) throw Error(Errc::empty_manifest, "dataset manifest has no items");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(Errc::invalid_argument, "subset fraction must be in (0, 1]");
  }
  const auto threshold = static_cast<std::uint64_t>(std::llround(fraction * 1e6));
  std::vector<std::string> kept;
  std::size_t best = 0;
  std::array<std::uint8_t, 32> best_digest{};
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto d = seeded_digest(seed, manifest[i]);
    if (be64(d.data()) % 1000000 < threshold) kept.push_back(manifest[i]);
    if (i == 0 || d < best_digest) {
      best = i;
      best_digest = d;
    }
  }
  if (kept.empty()) kept.push_back(manifest[best]);
  return kept;
}

std::vector<std::string> parse_item_manifest(std::string_view text) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) items.emplace_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return items;
}

DataScope scope_for(Store& store, const ArtifactVersionTuple& tuple, DataScope::Mode mode,
                    double fraction, std::int64_t seed) {
  DataScope scope;
  scope.mode = mode;
  scope.fraction = mode == DataScope::Mode::full ? 1.0 : fraction;
  scope.seed = seed;
  const auto* pin = tuple.find("data");
  if (!pin || !pin->content) return scope;
  auto data = resolve_pin(store, *pin);
  if (!data) {
    throw Error(Errc::unresolved_input, "data content " + pin->content->hex() + " is not in the store");
  }
  if (mode == DataScope::Mode::full) {
    scope.manifest_id = *data;
    return scope;
  }
  std::string text;
  for (const auto& item : subset_select(parse_item_manifest(store.get(*data)), fraction, seed)) {
    text += item;
    text += '\n';
  }
  scope.manifest_id = store.put(ArtifactKind::data, text, "text/plain",
                                {{"role", "subset-manifest"}, {"source", data->str()}});
  return scope;
}

Pipeline::Pipeline(Workspace& ws, PipelineOptions options) : ws_(ws), options_(std::move(options)) {}

namespace {

template <typename T>
std::vector<T> read_jsonl(const fs::path& path) {
  std::vector<T> out;
  for (const auto& line : io::read_lines(path)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw Error(Errc::integrity_violation, path.filename().string() + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, BranchPins> read_pins(const fs::path& path) {
  auto text = io::try_read_file(path);
  if (!text || text->empty()) return {};
  try {
    return json::parse(*text).get<std::map<std::string, BranchPins>>();
  } catch (const json::exception& e) {
    throw Error(Errc::integrity_violation, std::string("pins.json: ") + e.what());
  }
}

}  // namespace

std::map<std::string, BranchPins> Pipeline::pins() const { return read_pins(ws_.repo().pins_path()); }

std::optional<BranchPins> Pipeline::branch(const std::string& name) const {
  auto all = pins();
  if (auto it = all.find(name); it != all.end()) return it->second;
  return std::nullopt;
}

void Pipeline::write_pins(const std::map<std::string, BranchPins>& pins) {
  io::write_file_atomic(ws_.repo().pins_path(), json(pins).dump(2) + "\n");
}

void Pipeline::set_pin(const std::string& branch_name, const VersionPin& pin) {
  if (branch_name.empty()) throw Error(Errc::invalid_argument, "branch name is empty");
  auto guard = ws_.repo().lock();
  auto all = pins();
  auto& b = all[branch_name];
  b.branch = branch_name;
  b.pins.set(pin);
  write_pins(all);
}

std::vector<ChangeEvent> Pipeline::events() const { return read_jsonl<ChangeEvent>(ws_.repo().events_path()); }
std::vector<ValidationPlan> Pipeline::plans() const { return read_jsonl<ValidationPlan>(ws_.repo().plans_path()); }
std::vector<PromotionRequest> Pipeline::promotions() const {
  return read_jsonl<PromotionRequest>(ws_.repo().promotions_path());
}

std::optional<PromotionRequest> Pipeline::decision_for(const RunId& run) const {
  for (auto& p : promotions()) {
    if (p.run_id == run) return p;
  }
  return std::nullopt;
}

ValidationPlan Pipeline::ingest_event(ChangeEvent event) {
  if (event.event_id.empty()) throw Error(Errc::malformed_event, "event_id is empty");
  if (event.ref.empty()) throw Error(Errc::malformed_event, "ref is empty");
  if (event.new_pin.component != to_string(event.source)) {
    throw Error(Errc::malformed_event, "new_pin.component '" + event.new_pin.component +
                                           "' does not match source '" +
                                           std::string(to_string(event.source)) + "'");
  }
  if (event.new_pin.version.find('\n') != std::string::npos) {
    throw Error(Errc::malformed_event, "version contains a newline");
  }

  auto guard = ws_.repo().lock();
  for (auto& plan : plans()) {
    if (plan.event_id == event.event_id) return plan;
  }
  auto all = pins();
  auto it = all.find(event.ref);
  if (it == all.end()) it = all.find(std::string(kMainBranch));
  if (it == all.end()) {
    throw Error(Errc::unknown_branch, "no pins for '" + event.ref + "' and no main branch to inherit");
  }
  BranchPins current = it->second;
  current.branch = event.ref;

  ValidationPlan plan;
  plan.event_id = event.event_id;
  plan.branch = event.ref;
  plan.base = current.pins;
  plan.tuple = resolve_tuple(event, current);
  plan.subset_fraction = options_.subset_fraction;
  plan.subset_seed = options_.subset_seed;

  if (event.at.empty()) event.at = io::now_rfc3339();
  io::append_line(ws_.repo().events_path(), json(event).dump());
  io::append_line(ws_.repo().plans_path(), json(plan).dump());
  if (event.ref != kMainBranch) {
    auto& b = all[event.ref];
    if (b.branch.empty()) {
      b.branch = event.ref;
      b.last_release_run.reset();
      b.result_refs.clear();
    }
    b.pins = plan.tuple;
    write_pins(all);
  }
  return plan;
}

RunRecord Pipeline::run_validation(const ValidationPlan& plan, const FlowGraph& flow,
                                   StepExecutor& executor, const std::optional<ArtifactId>& flow_id) {
  auto branch_guard = ws_.repo().lock_branch(plan.branch);
  ExecuteOptions opts;
  opts.kind = RunKind::validation;
  opts.scope = scope_for(ws_.store(), plan.tuple, DataScope::Mode::subset, plan.subset_fraction,
                         plan.subset_seed);
  opts.branch = plan.branch;
  opts.labels = {{"branch", plan.branch}, {"event_id", plan.event_id}};
  opts.parallelism = options_.parallelism;
  opts.flow_id = flow_id;
  opts.environment = options_.environment;
  return ws_.run_experiment(flow, plan.tuple, executor, opts);
}

PromotionRequest Pipeline::decide(const RunId& run_id, const std::string& approver, Decision decision,
                                  const std::string& reason) {
  if (approver.empty()) throw Error(Errc::invalid_argument, "approver is empty");
  auto run = ws_.runs().load(run_id);
  auto guard = ws_.repo().lock();
  if (auto prior = decision_for(run_id)) {
    throw Error(Errc::already_decided, "run " + run_id.str() + " was already " +
                                           std::string(to_string(prior->decision)) + " by " +
                                           prior->approver);
  }
  if (run.kind != RunKind::validation) {
    throw Error(Errc::invalid_argument, "run " + run_id.str() + " is not a validation run");
  }
  if (decision == Decision::approved) {
    if (run.status != RunStatus::succeeded) {
      throw Error(Errc::run_not_succeeded,
                  "run " + run_id.str() + " is " + std::string(to_string(run.status)));
    }
    auto report = evaluate_gate(ws_.feedback().load_bundle(run_id).metrics, options_.gate);
    if (!report.pass) {
      std::string failed;
      for (const auto& r : report.results) {
        if (r.satisfied) continue;
        if (!failed.empty()) failed += ", ";
        failed += r.metric + " " + r.required + " (observed " +
                  (r.observed ? json(*r.observed).dump() : std::string("none")) + ")";
      }
      throw Error(Errc::gate_failed, "run " + run_id.str() + " fails gate: " + failed);
    }
  }
  PromotionRequest req{run_id, approver, decision, reason, io::now_rfc3339()};
  io::append_line(ws_.repo().promotions_path(), json(req).dump());
  return req;
}

PromotionRequest Pipeline::approve(const RunId& run, const std::string& approver) {
  return decide(run, approver, Decision::approved, "");
}

PromotionRequest Pipeline::reject(const RunId& run, const std::string& approver, const std::string& reason) {
  return decide(run, approver, Decision::rejected, reason);
}

RunRecord Pipeline::run_release(const RunId& approved, StepExecutor& executor, const FlowGraph* flow) {
  auto validation = ws_.runs().load(approved);
  auto decision = decision_for(approved);
  if (!decision || decision->decision != Decision::approved) {
    throw Error(Errc::not_approved, "run " + approved.str() + " has no approval");
  }
  auto branch_guard = ws_.repo().lock_branch(std::string(kMainBranch));
  for (const auto& r : ws_.runs().list()) {
    auto it = r.labels.find("promoted-from");
    if (r.kind == RunKind::release && r.status == RunStatus::succeeded && it != r.labels.end() &&
        it->second == approved.str()) {
      throw Error(Errc::already_released, "run " + approved.str() + " was released as " + r.run_id.str());
    }
  }

  FlowGraph loaded;
  if (!flow) {
    loaded = ws_.load_flow(validation);
    flow = &loaded;
  }
  ExecuteOptions opts;
  opts.kind = RunKind::release;
  opts.scope = scope_for(ws_.store(), validation.tuple, DataScope::Mode::full, 1.0, validation.data_scope.seed);
  opts.branch = std::string(kMainBranch);
  opts.labels = {{"branch", std::string(kMainBranch)}, {"promoted-from", approved.str()}};
  if (auto it = validation.labels.find("event_id"); it != validation.labels.end()) {
    opts.labels["event_id"] = it->second;
  }
  opts.parallelism = options_.parallelism;
  opts.flow_id = validation.flow_id;
  opts.environment = options_.environment;

  auto release = ws_.run_experiment(*flow, validation.tuple, executor, opts);
  if (release.status != RunStatus::succeeded) return release;

  auto guard = ws_.repo().lock();
  auto all = pins();
  auto& main = all[std::string(kMainBranch)];
  main.branch = std::string(kMainBranch);
  main.pins = release.tuple;
  main.last_release_run = release.run_id;
  main.result_refs = release.result_ids;
  write_pins(all);
  return release;
}

}  // namespace ca
