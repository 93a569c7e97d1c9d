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


#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iterator>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "ca/executor.hpp"
#include "ca/feedback.hpp"
#include "ca/flow.hpp"
#include "ca/io.hpp"
#include "ca/lineage.hpp"
#include "ca/pipeline.hpp"
#include "ca/workspace.hpp"
#include "json.hpp"

namespace ca::cli {

using nlohmann::json;

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::storage_io:
    case Errc::repo_not_initialized:
    case Errc::lock_held:
    case Errc::integrity_violation:
    case Errc::missing_input:
      return 3;
    case Errc::invalid_argument:
      return 2;
    default:
      return 1;
  }
}

namespace {

struct Globals {
  std::optional<std::string> repo;
  bool json = false;
  std::optional<std::size_t> parallelism;
  std::optional<double> subset_fraction;
  std::optional<std::int64_t> subset_seed;
};

struct Config {
  fs::path repo;
  std::size_t parallelism = 4;
  double subset_fraction = 0.1;
  std::int64_t subset_seed = 0;
};

Config resolve_config(const Globals& g) {
  Config c;
  if (g.repo) {
    c.repo = *g.repo;
  } else if (const char* env = std::getenv("CA_REPO"); env && *env) {
    c.repo = env;
  } else {
    c.repo = ".ca";
  }

  json file = json::object();
  if (auto text = io::try_read_file(c.repo / "config.json")) {
    try {
      file = json::parse(*text);
    } catch (const json::exception& e) {
      throw Error(Errc::integrity_violation, std::string("config.json: ") + e.what());
    }
  }
  auto from_file = [&](const char* key, auto fallback) {
    using T = decltype(fallback);
    if (file.is_object() && file.contains(key) && file[key].is_number()) return file[key].get<T>();
    return fallback;
  };

  if (g.parallelism) {
    c.parallelism = *g.parallelism;
  } else if (const char* env = std::getenv("CA_PARALLELISM"); env && *env) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw Error(Errc::invalid_argument, "CA_PARALLELISM must be a positive integer");
    c.parallelism = static_cast<std::size_t>(v);
  } else {
    c.parallelism = static_cast<std::size_t>(from_file("parallelism", std::int64_t{4}));
  }
  c.subset_fraction = g.subset_fraction.value_or(from_file("subset_fraction", 0.1));
  c.subset_seed = g.subset_seed.value_or(from_file("subset_seed", std::int64_t{0}));

  if (c.parallelism < 1) throw Error(Errc::invalid_argument, "parallelism must be >= 1");
  if (!(c.subset_fraction > 0.0 && c.subset_fraction <= 1.0)) {
    throw Error(Errc::invalid_argument, "subset fraction must be in (0, 1]");
  }
  return c;
}

std::string dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace);
}

void print_table(std::ostream& out, const std::vector<std::string>& headers,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(headers.size());
  for (std::size_t i = 0; i < headers.size(); ++i) width[i] = headers[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size() && i < width.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << cells[i];
      if (i + 1 < cells.size()) out << std::string(width[i] - cells[i].size() + 2, ' ');
    }
    out << '\n';
  };
  line(headers);
  for (const auto& row : rows) line(row);
}

std::string read_input_file(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), {});
  }
  auto text = io::try_read_file(path);
  if (!text) throw Error(Errc::invalid_argument, "cannot read '" + path + "'");
  return *text;
}

/// `component=version` with an optional `@<64 hex>` content suffix.
VersionPin parse_pin_arg(const std::string& arg) {
  auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(Errc::invalid_argument, "pin '" + arg + "' is not component=version[@hash]");
  }
  VersionPin pin;
  pin.component = arg.substr(0, eq);
  pin.version = arg.substr(eq + 1);
  if (auto at = pin.version.rfind('@'); at != std::string::npos) {
    if (auto h = ContentHash::parse(pin.version.substr(at + 1))) {
      pin.content = *h;
      pin.version.resize(at);
    }
  }
  return pin;
}

Labels parse_labels(const std::vector<std::string>& args) {
  Labels labels;
  for (const auto& a : args) {
    auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::invalid_argument, "label '" + a + "' is not key=value");
    labels[a.substr(0, eq)] = a.substr(eq + 1);
  }
  return labels;
}

std::string format_pin(const VersionPin& pin) {
  std::string s = pin.version;
  if (pin.content) s += " @" + std::string(pin.content->prefix(12));
  return s;
}

std::string format_labels(const Labels& labels) {
  std::string s;
  for (const auto& [k, v] : labels) {
    if (!s.empty()) s += ',';
    s += k + "=" + v;
  }
  return s;
}

GatePolicy load_policy(const Repository& repo, const std::optional<std::string>& path) {
  if (path) return GatePolicy::parse(read_input_file(*path));
  if (auto text = io::try_read_file(repo.gates_path())) return GatePolicy::parse(*text);
  return {};
}

void print_run(std::ostream& out, const RunRecord& r) {
  out << "run       " << r.run_id.str() << '\n'
      << "kind      " << to_string(r.kind) << '\n'
      << "branch    " << r.branch << '\n'
      << "status    " << to_string(r.status) << '\n'
      << "started   " << r.started_at << '\n'
      << "finished  " << r.finished_at.value_or("-") << '\n'
      << "tuple     " << tuple_hash(r.tuple).hex() << '\n';
  for (const auto& [c, pin] : r.tuple.pins()) out << "  " << c << " = " << format_pin(pin) << '\n';
  if (r.data_scope.mode == DataScope::Mode::subset) {
    out << "scope     subset fraction=" << r.data_scope.fraction << " seed=" << r.data_scope.seed << '\n';
  } else {
    out << "scope     full\n";
  }
  if (!r.labels.empty()) out << "labels    " << format_labels(r.labels) << '\n';
  if (r.feedback_id) out << "feedback  " << r.feedback_id->str() << '\n';
  std::vector<std::vector<std::string>> rows;
  for (const auto& o : r.step_outcomes) {
    std::string outputs;
    for (const auto& [slot, id] : o.output_ids) {
      if (!outputs.empty()) outputs += ' ';
      outputs += slot + "=" + std::string(id.hash.prefix(12));
    }
    rows.push_back({o.task_name(), std::to_string(o.exit_code), std::to_string(o.wall_time_ms), outputs});
  }
  out << '\n';
  print_table(out, {"TASK", "EXIT", "MS", "OUTPUTS"}, rows);
  if (!r.skipped_steps.empty()) {
    out << "skipped:";
    for (const auto& s : r.skipped_steps) out << ' ' << s;
    out << '\n';
  }
}

void print_run_line(std::ostream& out, const RunRecord& r) {
  out << "run " << r.run_id.str() << " " << to_string(r.kind) << " on " << r.branch << ": "
      << to_string(r.status) << '\n';
}

int run_status_code(const RunRecord& r) { return r.status == RunStatus::succeeded ? 0 : 1; }

class Command {
 public:
  Command(Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

  Config& config() {
    if (!config_) config_ = resolve_config(g_);
    return *config_;
  }
  Workspace& ws() {
    if (!ws_) ws_ = std::make_unique<Workspace>(Repository::open(config().repo));
    return *ws_;
  }
  Pipeline pipeline(std::optional<std::string> policy_path = std::nullopt) {
    PipelineOptions o;
    o.subset_fraction = config().subset_fraction;
    o.subset_seed = config().subset_seed;
    o.parallelism = config().parallelism;
    o.gate = load_policy(ws().repo(), policy_path);
    return Pipeline(ws(), o);
  }
  bool json_mode() const { return g_.json; }
  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }
  void emit(const json& j) { out_ << dump(j) << '\n'; }

 private:
  Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
  std::optional<Config> config_;
  std::unique_ptr<Workspace> ws_;
};

using Action = std::function<int(Command&)>;

void add_repo_commands(CLI::App& app, Action& action) {
  auto* init = app.add_subcommand("init", "Create the repository skeleton (idempotent)");
  init->callback([&action] {
    action = [](Command& c) {
      bool existed = Repository::is_initialized(c.config().repo);
      auto repo = Repository::init(c.config().repo);
      if (c.json_mode()) {
        c.emit({{"repo", repo.root().string()}, {"created", !existed}});
      } else {
        c.out() << (existed ? "already initialized " : "initialized ") << repo.root().string() << '\n';
      }
      return 0;
    };
  });
}

void add_artifact_commands(CLI::App& app, Action& action) {
  auto* artifact = app.add_subcommand("artifact", "Content-addressed artifact store");
  artifact->require_subcommand(1);

  struct PutArgs {
    std::string file, kind = "data", media_type = "application/octet-stream";
    std::vector<std::string> labels;
  };
  auto put_args = std::make_shared<PutArgs>();
  auto* put = artifact->add_subcommand("put", "Store a file ('-' for stdin)");
  put->add_option("file", put_args->file)->required();
  put->add_option("--kind", put_args->kind, "data|code|dependency|test|deployment|result");
  put->add_option("--media-type", put_args->media_type);
  put->add_option("--label", put_args->labels, "key=value, repeatable");
  put->callback([&action, put_args] {
    action = [put_args](Command& c) {
      auto kind = parse_artifact_kind(put_args->kind);
      if (!kind) throw Error(Errc::invalid_argument, "unknown kind '" + put_args->kind + "'");
      auto bytes = read_input_file(put_args->file);
      auto id = c.ws().store().put(*kind, bytes, put_args->media_type, parse_labels(put_args->labels));
      if (c.json_mode()) {
        c.emit(*c.ws().store().record(id));
      } else {
        c.out() << id.str() << '\n';
      }
      return 0;
    };
  });

  struct GetArgs {
    std::string id;
    std::optional<std::string> output;
  };
  auto get_args = std::make_shared<GetArgs>();
  auto* get = artifact->add_subcommand("get", "Print an artifact's bytes");
  get->add_option("id", get_args->id)->required();
  get->add_option("-o,--output", get_args->output, "Write to a file instead of stdout");
  get->callback([&action, get_args] {
    action = [get_args](Command& c) {
      auto id = ArtifactId::parse(get_args->id);
      auto bytes = c.ws().store().get(id);
      if (get_args->output) io::write_file_atomic(*get_args->output, bytes);
      if (c.json_mode()) {
        json j = *c.ws().store().record(id);
        if (!get_args->output) j["content"] = bytes;
        c.emit(j);
      } else if (!get_args->output) {
        c.out() << bytes;
      }
      return 0;
    };
  });

  auto verify_id = std::make_shared<std::string>();
  auto* verify = artifact->add_subcommand("verify", "Re-hash an artifact's stored bytes");
  verify->add_option("id", *verify_id)->required();
  verify->callback([&action, verify_id] {
    action = [verify_id](Command& c) {
      auto id = ArtifactId::parse(*verify_id);
      bool ok = c.ws().store().verify(id);
      if (c.json_mode()) {
        c.emit({{"id", id.str()}, {"ok", ok}});
      } else {
        c.out() << (ok ? "ok " : "CORRUPT ") << id.str() << '\n';
      }
      if (!ok) c.err() << "error: integrity-violation: " << id.str() << " does not match its hash\n";
      return ok ? 0 : 3;
    };
  });

  struct LsArgs {
    std::optional<std::string> kind;
    std::vector<std::string> labels;
  };
  auto ls_args = std::make_shared<LsArgs>();
  auto* ls = artifact->add_subcommand("ls", "List artifacts");
  ls->add_option("--kind", ls_args->kind);
  ls->add_option("--label", ls_args->labels, "key=value filter, repeatable");
  ls->callback([&action, ls_args] {
    action = [ls_args](Command& c) {
      std::optional<ArtifactKind> kind;
      if (ls_args->kind) {
        kind = parse_artifact_kind(*ls_args->kind);
        if (!kind) throw Error(Errc::invalid_argument, "unknown kind '" + *ls_args->kind + "'");
      }
      auto records = c.ws().store().list(kind, parse_labels(ls_args->labels));
      if (c.json_mode()) {
        c.emit(records);
        return 0;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : records) {
        rows.push_back({r.id.str(), std::to_string(r.size), r.media_type, r.created_at, format_labels(r.labels)});
      }
      print_table(c.out(), {"ID", "SIZE", "MEDIA", "CREATED", "LABELS"}, rows);
      return 0;
    };
  });
}

json violations_json(const std::vector<Violation>& vs) {
  json arr = json::array();
  for (const auto& v : vs) arr.push_back({{"kind", v.kind}, {"message", v.message}, {"steps", v.steps}});
  return arr;
}

ArtifactVersionTuple tuple_from_args(Command& c, const std::optional<std::string>& branch,
                                     const std::vector<std::string>& pin_args) {
  ArtifactVersionTuple tuple;
  if (branch || pin_args.empty()) {
    auto name = branch.value_or(std::string(kMainBranch));
    auto b = c.pipeline().branch(name);
    if (!b) throw Error(Errc::unknown_branch, "no pins for branch '" + name + "'");
    tuple = b->pins;
  }
  for (const auto& p : pin_args) tuple.set(parse_pin_arg(p));
  return tuple;
}

void add_flow_commands(CLI::App& app, Action& action) {
  auto* flow = app.add_subcommand("flow", "Experiment flows");
  flow->require_subcommand(1);

  auto validate_file = std::make_shared<std::string>();
  auto* validate_cmd = flow->add_subcommand("validate", "Check a flow manifest");
  validate_cmd->add_option("manifest", *validate_file)->required();
  validate_cmd->callback([&action, validate_file] {
    action = [validate_file](Command& c) {
      auto graph = parse_manifest(read_input_file(*validate_file));
      auto violations = validate(graph);
      if (!violations.empty()) {
        if (c.json_mode()) c.emit({{"valid", false}, {"violations", violations_json(violations)}});
        for (const auto& v : violations) c.err() << v.kind << ": " << v.message << '\n';
        return 1;
      }
      auto order = topo_order(graph);
      if (c.json_mode()) {
        c.emit({{"valid", true}, {"violations", json::array()}, {"order", order}});
      } else {
        c.out() << "valid: " << graph.steps.size() << " steps\norder:";
        for (const auto& s : order) c.out() << ' ' << s;
        c.out() << '\n';
      }
      return 0;
    };
  });

  auto graph_file = std::make_shared<std::string>();
  auto* graph_cmd = flow->add_subcommand("graph", "Render a flow as Graphviz DOT");
  graph_cmd->add_option("manifest", *graph_file)->required();
  graph_cmd->callback([&action, graph_file] {
    action = [graph_file](Command& c) {
      auto graph = parse_manifest(read_input_file(*graph_file));
      if (auto violations = validate(graph); !violations.empty()) {
        for (const auto& v : violations) c.err() << v.kind << ": " << v.message << '\n';
        return 1;
      }
      auto dot = to_dot(graph);
      if (c.json_mode()) {
        c.emit({{"dot", dot}});
      } else {
        c.out() << dot;
      }
      return 0;
    };
  });

  struct RunArgs {
    std::string manifest;
    std::optional<std::string> branch;
    std::vector<std::string> pins;
    bool subset = false;
    std::vector<std::string> labels;
  };
  auto run_args = std::make_shared<RunArgs>();
  auto* run = flow->add_subcommand("run", "Execute a flow against a tuple");
  run->add_option("manifest", run_args->manifest)->required();
  run->add_option("--branch", run_args->branch, "Start from this branch's pins (default main)");
  run->add_option("--pin", run_args->pins, "component=version[@hash], repeatable");
  run->add_flag("--subset", run_args->subset, "Run on the configured data subset");
  run->add_option("--label", run_args->labels, "key=value, repeatable");
  run->callback([&action, run_args] {
    action = [run_args](Command& c) {
      auto text = read_input_file(run_args->manifest);
      auto graph = parse_manifest(text);
      auto tuple = tuple_from_args(c, run_args->branch, run_args->pins);
      ExecuteOptions opts;
      opts.kind = RunKind::validation;
      opts.scope = scope_for(c.ws().store(), tuple,
                             run_args->subset ? DataScope::Mode::subset : DataScope::Mode::full,
                             run_args->subset ? c.config().subset_fraction : 1.0, c.config().subset_seed);
      opts.branch = run_args->branch.value_or(std::string(kMainBranch));
      opts.labels = parse_labels(run_args->labels);
      opts.parallelism = c.config().parallelism;
      opts.flow_id = c.ws().store_flow(text);
      ProcessExecutor executor;
      auto record = c.ws().run_experiment(graph, tuple, executor, opts);
      if (c.json_mode()) {
        c.emit(record);
      } else {
        print_run_line(c.out(), record);
      }
      return run_status_code(record);
    };
  });
}

void add_event_commands(CLI::App& app, Action& action) {
  auto* event = app.add_subcommand("event", "Change events");
  event->require_subcommand(1);

  struct EmitArgs {
    std::string source, ref, version;
    std::optional<std::string> content, id, flow, at;
  };
  auto a = std::make_shared<EmitArgs>();
  auto* emit = event->add_subcommand("emit", "Ingest a change event and plan a validation run");
  emit->add_option("--source", a->source, "code|data|dependencies|deployment")->required();
  emit->add_option("--ref", a->ref, "Branch the change lands on")->required();
  emit->add_option("--version", a->version)->required();
  emit->add_option("--content", a->content, "Content hash of the new version");
  emit->add_option("--id", a->id, "Event id (deduplication key)");
  emit->add_option("--flow", a->flow, "Run the validation immediately with this manifest");
  emit->add_option("--at", a->at, "Event timestamp");
  emit->callback([&action, a] {
    action = [a](Command& c) {
      ChangeEvent ev;
      auto src = parse_source(a->source);
      if (!src) throw Error(Errc::malformed_event, "unknown source '" + a->source + "'");
      ev.source = *src;
      ev.ref = a->ref;
      ev.new_pin.component = a->source;
      ev.new_pin.version = a->version;
      if (a->content) {
        auto h = ContentHash::parse(*a->content);
        if (!h) throw Error(Errc::malformed_event, "content '" + *a->content + "' is not a SHA-256 hex digest");
        ev.new_pin.content = *h;
      }
      ev.at = a->at.value_or("");
      ev.event_id = a->id.value_or(
          "evt-" + std::string(ContentHash::of(a->source + "\n" + a->ref + "\n" + a->version + "\n" +
                                               a->content.value_or("") + "\n" + io::now_rfc3339())
                                   .prefix(16)));
      auto pipeline = c.pipeline();
      auto plan = pipeline.ingest_event(ev);
      std::optional<RunRecord> record;
      if (a->flow) {
        auto text = read_input_file(*a->flow);
        auto graph = parse_manifest(text);
        ProcessExecutor executor;
        record = pipeline.run_validation(plan, graph, executor, c.ws().store_flow(text));
      }
      if (c.json_mode()) {
        json j = {{"plan", plan}};
        j["run"] = record ? json(*record) : json(nullptr);
        c.emit(j);
      } else {
        c.out() << "event " << plan.event_id << " -> validation on " << plan.branch << ", tuple "
                << tuple_hash(plan.tuple).prefix(12) << '\n';
        for (const auto& ch : diff_tuples(plan.base, plan.tuple)) {
          c.out() << "  " << ch.component << ": " << (ch.before ? format_pin(*ch.before) : "-") << " -> "
                  << (ch.after ? format_pin(*ch.after) : "-") << '\n';
        }
        if (record) print_run_line(c.out(), *record);
      }
      return record ? run_status_code(*record) : 0;
    };
  });
}

void add_run_commands(CLI::App& app, Action& action) {
  auto* run = app.add_subcommand("run", "Run records");
  run->require_subcommand(1);

  struct LsArgs {
    std::optional<std::string> branch, kind;
  };
  auto ls_args = std::make_shared<LsArgs>();
  auto* ls = run->add_subcommand("ls", "List runs");
  ls->add_option("--branch", ls_args->branch);
  ls->add_option("--kind", ls_args->kind, "validation|release");
  ls->callback([&action, ls_args] {
    action = [ls_args](Command& c) {
      std::vector<RunRecord> runs;
      for (auto& r : c.ws().runs().list()) {
        if (ls_args->branch && r.branch != *ls_args->branch) continue;
        if (ls_args->kind && to_string(r.kind) != *ls_args->kind) continue;
        runs.push_back(std::move(r));
      }
      if (c.json_mode()) {
        c.emit(runs);
        return 0;
      }
      std::vector<std::vector<std::string>> rows;
      for (const auto& r : runs) {
        rows.push_back({r.run_id.str(), std::string(to_string(r.kind)), r.branch,
                        std::string(to_string(r.status)), r.started_at});
      }
      print_table(c.out(), {"RUN", "KIND", "BRANCH", "STATUS", "STARTED"}, rows);
      return 0;
    };
  });

  auto show_id = std::make_shared<std::string>();
  auto* show = run->add_subcommand("show", "Show one run");
  show->add_option("run", *show_id)->required();
  show->callback([&action, show_id] {
    action = [show_id](Command& c) {
      auto record = c.ws().runs().load(RunId::parse(*show_id));
      if (c.json_mode()) {
        c.emit(record);
      } else {
        print_run(c.out(), record);
      }
      return 0;
    };
  });

  auto diff_ids = std::make_shared<std::pair<std::string, std::string>>();
  auto* diff = run->add_subcommand("diff", "Compare two aligned runs");
  diff->add_option("a", diff_ids->first)->required();
  diff->add_option("b", diff_ids->second)->required();
  diff->callback([&action, diff_ids] {
    action = [diff_ids](Command& c) {
      auto cmp = c.ws().feedback().compare_runs(RunId::parse(diff_ids->first), RunId::parse(diff_ids->second));
      if (c.json_mode()) {
        c.emit(cmp);
        return 0;
      }
      c.out() << cmp.a.str() << " -> " << cmp.b.str() << "\n\ntuple changes:\n";
      if (cmp.tuple_diff.empty()) c.out() << "  (none)\n";
      for (const auto& ch : cmp.tuple_diff) {
        c.out() << "  " << ch.component << ": " << (ch.before ? format_pin(*ch.before) : "-") << " -> "
                << (ch.after ? format_pin(*ch.after) : "-") << '\n';
      }
      c.out() << '\n';
      std::vector<std::vector<std::string>> rows;
      auto num = [](double v) { return json(v).dump(); };
      for (const auto& d : cmp.deltas) rows.push_back({d.metric, num(d.value_a), num(d.value_b), num(d.delta)});
      for (const auto& [m, v] : cmp.only_in_a) rows.push_back({m, num(v), "-", "-"});
      for (const auto& [m, v] : cmp.only_in_b) rows.push_back({m, "-", num(v), "-"});
      print_table(c.out(), {"METRIC", "A", "B", "DELTA"}, rows);
      return 0;
    };
  });
}

void add_gate_commands(CLI::App& app, Action& action) {
  auto* gate = app.add_subcommand("gate", "Gate policies");
  gate->require_subcommand(1);
  struct EvalArgs {
    std::string run;
    std::optional<std::string> policy;
  };
  auto a = std::make_shared<EvalArgs>();
  auto* eval = gate->add_subcommand("eval", "Evaluate a run's metrics against a gate policy");
  eval->add_option("run", a->run)->required();
  eval->add_option("--policy", a->policy, "Policy file (default: the repository's gates.json)");
  eval->callback([&action, a] {
    action = [a](Command& c) {
      auto bundle = c.ws().feedback().load_bundle(RunId::parse(a->run));
      auto report = evaluate_gate(bundle.metrics, load_policy(c.ws().repo(), a->policy));
      if (c.json_mode()) {
        c.emit(report);
      } else {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : report.results) {
          rows.push_back({r.metric, r.observed ? json(*r.observed).dump() : "-", r.required,
                          r.satisfied ? "ok" : "FAIL"});
        }
        print_table(c.out(), {"METRIC", "OBSERVED", "REQUIRED", "RESULT"}, rows);
        c.out() << (report.pass ? "gate: pass\n" : "gate: FAIL\n");
      }
      if (!report.pass) c.err() << "error: gate-failed: run " << a->run << " does not satisfy the policy\n";
      return report.pass ? 0 : 1;
    };
  });
}

void add_promotion_commands(CLI::App& app, Action& action) {
  struct ApproveArgs {
    std::string run, by;
    bool auto_release = false;
    std::optional<std::string> policy, flow;
  };
  auto a = std::make_shared<ApproveArgs>();
  auto* approve = app.add_subcommand("approve", "Approve a succeeded, gate-passing validation run");
  approve->add_option("run", a->run)->required();
  approve->add_option("--by", a->by, "Approver identity")->required();
  approve->add_option("--policy", a->policy, "Gate policy file (default: gates.json)");
  approve->add_flag("--auto-release", a->auto_release, "Run the release immediately");
  approve->add_option("--flow", a->flow, "Manifest for the release (default: the run's own)");
  approve->callback([&action, a] {
    action = [a](Command& c) {
      auto pipeline = c.pipeline(a->policy);
      auto id = RunId::parse(a->run);
      auto req = pipeline.approve(id, a->by);
      std::optional<RunRecord> release;
      if (a->auto_release) {
        ProcessExecutor executor;
        std::optional<FlowGraph> graph;
        if (a->flow) graph = parse_manifest(read_input_file(*a->flow));
        release = pipeline.run_release(id, executor, graph ? &*graph : nullptr);
      }
      if (c.json_mode()) {
        json j = {{"promotion", req}};
        j["release"] = release ? json(*release) : json(nullptr);
        c.emit(j);
      } else {
        c.out() << "approved " << id.str() << " by " << a->by << '\n';
        if (release) print_run_line(c.out(), *release);
      }
      return release ? run_status_code(*release) : 0;
    };
  });

  struct RejectArgs {
    std::string run, by, reason;
  };
  auto r = std::make_shared<RejectArgs>();
  auto* reject = app.add_subcommand("reject", "Reject a validation run");
  reject->add_option("run", r->run)->required();
  reject->add_option("--by", r->by)->required();
  reject->add_option("--reason", r->reason)->required();
  reject->callback([&action, r] {
    action = [r](Command& c) {
      auto req = c.pipeline().reject(RunId::parse(r->run), r->by, r->reason);
      if (c.json_mode()) {
        c.emit(req);
      } else {
        c.out() << "rejected " << r->run << " by " << r->by << '\n';
      }
      return 0;
    };
  });

  struct ReleaseArgs {
    std::string run;
    std::optional<std::string> flow;
  };
  auto rel = std::make_shared<ReleaseArgs>();
  auto* release = app.add_subcommand("release", "Run the release pipeline for an approved run");
  release->add_option("run", rel->run)->required();
  release->add_option("--flow", rel->flow, "Manifest (default: the approved run's own)");
  release->callback([&action, rel] {
    action = [rel](Command& c) {
      std::optional<FlowGraph> graph;
      if (rel->flow) graph = parse_manifest(read_input_file(*rel->flow));
      ProcessExecutor executor;
      auto record = c.pipeline().run_release(RunId::parse(rel->run), executor, graph ? &*graph : nullptr);
      if (c.json_mode()) {
        c.emit(record);
      } else {
        print_run_line(c.out(), record);
      }
      return run_status_code(record);
    };
  });
}

void add_lineage_commands(CLI::App& app, Action& action) {
  auto* lineage = app.add_subcommand("lineage", "Provenance queries");
  lineage->require_subcommand(1);

  auto who_id = std::make_shared<std::string>();
  auto* who = lineage->add_subcommand("who-uses", "Runs that consumed or pinned an artifact");
  who->add_option("artifact", *who_id)->required();
  who->callback([&action, who_id] {
    action = [who_id](Command& c) {
      auto id = ArtifactId::parse(*who_id);
      if (!c.ws().store().contains(id)) throw Error(Errc::not_found, id.str() + " is not in the store");
      auto runs = c.ws().lineage().runs_using(id);
      if (c.json_mode()) {
        c.emit({{"artifact", id.str()}, {"runs", runs}});
      } else {
        for (const auto& r : runs) c.out() << r.str() << '\n';
      }
      return 0;
    };
  });

  auto prov_id = std::make_shared<std::string>();
  auto* prov = lineage->add_subcommand("provenance", "Everything an artifact was derived from");
  prov->add_option("artifact", *prov_id)->required();
  prov->callback([&action, prov_id] {
    action = [prov_id](Command& c) {
      auto id = ArtifactId::parse(*prov_id);
      if (!c.ws().store().contains(id)) throw Error(Errc::not_found, id.str() + " is not in the store");
      std::vector<std::string> nodes;
      for (const auto& n : c.ws().lineage().provenance_of(id)) nodes.push_back(to_string(n));
      if (c.json_mode()) {
        c.emit({{"artifact", id.str()}, {"nodes", nodes}});
      } else {
        for (const auto& n : nodes) c.out() << n << '\n';
      }
      return 0;
    };
  });

  struct ReplayArgs {
    std::string run;
    std::optional<std::string> flow;
  };
  auto rp = std::make_shared<ReplayArgs>();
  auto* replay = app.add_subcommand("replay", "Re-execute a run and compare outputs by hash");
  replay->add_option("run", rp->run)->required();
  replay->add_option("--flow", rp->flow, "Manifest (default: the run's own)");
  replay->callback([&action, rp] {
    action = [rp](Command& c) {
      std::optional<FlowGraph> graph;
      if (rp->flow) graph = parse_manifest(read_input_file(*rp->flow));
      ProcessExecutor executor;
      auto result = replay_check(c.ws(), RunId::parse(rp->run), executor, graph ? &*graph : nullptr,
                                 c.config().parallelism);
      if (c.json_mode()) {
        c.emit(result);
      } else if (result.identical) {
        c.out() << "identical (replay " << result.replay.run_id.str() << ")\n";
      } else {
        c.out() << "diverged (replay " << result.replay.run_id.str() << ")\n";
        for (const auto& d : result.diverged) {
          c.out() << "  " << d.task << " " << d.slot << ": "
                  << (d.old_hash ? std::string(d.old_hash->prefix(12)) : "-") << " -> "
                  << (d.new_hash ? std::string(d.new_hash->prefix(12)) : "-") << '\n';
        }
      }
      return result.identical ? 0 : 1;
    };
  });
}

void add_pins_commands(CLI::App& app, Action& action) {
  auto* pins = app.add_subcommand("pins", "Branch pins");
  pins->require_subcommand(1);

  auto show_branch = std::make_shared<std::optional<std::string>>();
  auto* show = pins->add_subcommand("show", "Show pins for one or all branches");
  show->add_option("branch", *show_branch);
  show->callback([&action, show_branch] {
    action = [show_branch](Command& c) {
      auto all = c.pipeline().pins();
      if (*show_branch) {
        auto it = all.find(**show_branch);
        if (it == all.end()) throw Error(Errc::unknown_branch, "no pins for branch '" + **show_branch + "'");
        all = {*it};
      }
      if (c.json_mode()) {
        c.emit(*show_branch ? json(all.begin()->second) : json(all));
        return 0;
      }
      for (const auto& [name, b] : all) {
        c.out() << name;
        if (b.last_release_run) c.out() << " (released by " << b.last_release_run->str() << ")";
        c.out() << '\n';
        for (const auto& [comp, pin] : b.pins.pins()) c.out() << "  " << comp << " = " << format_pin(pin) << '\n';
      }
      return 0;
    };
  });

  struct SetArgs {
    std::string branch, component, version;
    std::optional<std::string> content;
  };
  auto s = std::make_shared<SetArgs>();
  auto* set = pins->add_subcommand("set", "Set one pin on a branch");
  set->add_option("branch", s->branch)->required();
  set->add_option("component", s->component)->required();
  set->add_option("version", s->version)->required();
  set->add_option("--content", s->content, "Content hash");
  set->callback([&action, s] {
    action = [s](Command& c) {
      VersionPin pin{s->component, s->version, std::nullopt};
      if (s->content) pin.content = ContentHash::from_hex(*s->content);
      auto pipeline = c.pipeline();
      pipeline.set_pin(s->branch, pin);
      if (c.json_mode()) {
        c.emit(*pipeline.branch(s->branch));
      } else {
        c.out() << s->branch << ": " << s->component << " = " << format_pin(pin) << '\n';
      }
      return 0;
    };
  });
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continuous analysis engine", "ca"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals globals;
  app.add_option("--repo", globals.repo, "Repository directory (env CA_REPO, default ./.ca)");
  app.add_flag("--json", globals.json, "Emit one JSON document on stdout");
  app.add_option("--parallelism", globals.parallelism, "Concurrent tasks (env CA_PARALLELISM)")
      ->check(CLI::PositiveNumber);
  app.add_option("--subset-fraction", globals.subset_fraction, "Validation subset fraction");
  app.add_option("--subset-seed", globals.subset_seed, "Validation subset seed");

  Action action;
  add_repo_commands(app, action);
  add_artifact_commands(app, action);
  add_flow_commands(app, action);
  add_event_commands(app, action);
  add_run_commands(app, action);
  add_gate_commands(app, action);
  add_promotion_commands(app, action);
  add_lineage_commands(app, action);
  add_pins_commands(app, action);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }
  if (!action) return 2;

  Command cmd(globals, out, err);
  try {
    return action(cmd);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace ca::cli
