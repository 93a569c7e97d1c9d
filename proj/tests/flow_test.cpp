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


#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "ca/flow.hpp"
#include "support.hpp"

namespace ca {
namespace {

using test::TestRepo;

std::string step_json(const std::string& name, const std::string& inputs, const std::string& outputs,
                      const std::string& command = "run") {
  return R"({"name":")" + name + R"(","command":")" + command + R"(","inputs":)" + inputs +
         R"(,"outputs":)" + outputs + "}";
}

std::string manifest(const std::vector<std::string>& steps, const std::string& outcomes) {
  std::string s = R"({"steps":[)";
  for (std::size_t i = 0; i < steps.size(); ++i) s += (i ? "," : "") + steps[i];
  return s + R"(],"outcomes":)" + outcomes + "}";
}

TEST(Manifest, ParsesReferenceFlow) {
  auto g = parse_manifest(test::kScoringFlow);
  ASSERT_EQ(g.steps.size(), 4u);
  const auto* s4 = g.find("step4");
  ASSERT_NE(s4, nullptr);
  ASSERT_TRUE(s4->partition);
  EXPECT_EQ(s4->partition->count, 3);
  EXPECT_EQ(std::get<SlotRef>(s4->inputs.at("prepared")), (SlotRef{"step1", "prepared"}));
  EXPECT_EQ(std::get<PinnedComponent>(g.find("step1")->inputs.at("raw")).component, "data");
  EXPECT_TRUE(validate(g).empty());
}

TEST(Manifest, SyntaxErrorIsParseError) {
  CA_EXPECT_ERROR(parse_manifest("{\"steps\": ["), Errc::parse_error);
}

TEST(Manifest, SchemaViolations) {
  auto out = R"([{"step":"a","slot":"o"}])";
  CA_EXPECT_ERROR(parse_manifest(R"({"steps":[],"outcomes":[],"extra":1})"), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["o"])")}, "[]")), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("A b", "{}", R"(["o"])")}, out)), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["o","o"])")}, out)), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["o"])", "")}, out)), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", R"({"x":{"bogus":1}})", R"(["o"])")}, out)),
                  Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["o"])", "cat {input:nope}")}, out)),
                  Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["__o"])")}, out)), Errc::schema_error);
  CA_EXPECT_ERROR(parse_manifest(manifest({step_json("a", "{}", R"(["o"])", "echo {partition}")}, out)),
                  Errc::schema_error);
  CA_EXPECT_ERROR(
      parse_manifest(R"({"steps":[{"name":"a","command":"x","outputs":["o","p"],
                       "partition":{"count":2,"merge_command":"cat {partitions}"}}],
                       "outcomes":[{"step":"a","slot":"o"}]})"),
      Errc::schema_error);
  CA_EXPECT_ERROR(
      parse_manifest(R"({"steps":[{"name":"a","command":"x","outputs":["o"],
                       "partition":{"count":0,"merge_command":"cat"}}],
                       "outcomes":[{"step":"a","slot":"o"}]})"),
      Errc::schema_error);
}

TEST(Manifest, UnknownBracesPassThrough) {
  auto g = parse_manifest(manifest({step_json("a", "{}", R"(["o"])", "awk '{print $1}' ${HOME} > {output:o}")},
                                   R"([{"step":"a","slot":"o"}])"));
  EXPECT_EQ(g.steps[0].command, "awk '{print $1}' ${HOME} > {output:o}");
}

TEST(Graph, ReportsDanglingDuplicateAndUnknownOutcome) {
  auto g = parse_manifest(manifest(
      {step_json("a", R"({"i":{"step":"ghost","slot":"o"}})", R"(["o"])"),
       step_json("b", R"({"i":{"step":"a","slot":"missing"}})", R"(["o"])"),
       step_json("b", "{}", R"(["o"])")},
      R"([{"step":"a","slot":"zzz"}])"));
  auto vs = validate(g);
  std::set<std::string> kinds;
  for (const auto& v : vs) kinds.insert(v.kind);
  EXPECT_TRUE(kinds.contains("dangling-reference"));
  EXPECT_TRUE(kinds.contains("duplicate-step"));
  EXPECT_TRUE(kinds.contains("unknown-outcome"));
  EXPECT_EQ(std::count_if(vs.begin(), vs.end(), [](auto& v) { return v.kind == "dangling-reference"; }), 2);
}

TEST(Graph, CycleNamesItsMembers) {
  auto g = parse_manifest(manifest(
      {step_json("a", R"({"i":{"step":"c","slot":"o"}})", R"(["o"])"),
       step_json("b", R"({"i":{"step":"a","slot":"o"}})", R"(["o"])"),
       step_json("c", R"({"i":{"step":"b","slot":"o"}})", R"(["o"])"),
       step_json("d", R"({"i":{"step":"c","slot":"o"}})", R"(["o"])")},
      R"([{"step":"d","slot":"o"}])"));
  auto vs = validate(g);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].kind, "cycle");
  EXPECT_EQ(vs[0].steps, (std::vector<std::string>{"a", "b", "c"}));
  CA_EXPECT_ERROR(topo_order(g), Errc::cycle);
}

TEST(Graph, SelfLoopIsACycle) {
  auto g = parse_manifest(manifest({step_json("a", R"({"i":{"step":"a","slot":"o"}})", R"(["o"])")},
                                   R"([{"step":"a","slot":"o"}])"));
  auto vs = validate(g);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].kind, "cycle");
}

TEST(Graph, TopoOrderIsLexicographicAmongReadySteps) {
  auto g = parse_manifest(test::kScoringFlow);
  EXPECT_EQ(topo_order(g), (std::vector<std::string>{"step1", "step2", "step3", "step4"}));
  auto h = parse_manifest(manifest(
      {step_json("z", "{}", R"(["o"])"), step_json("m", R"({"i":{"step":"z","slot":"o"}})", R"(["o"])"),
       step_json("a", "{}", R"(["o"])")},
      R"([{"step":"m","slot":"o"}])"));
  EXPECT_EQ(topo_order(h), (std::vector<std::string>{"a", "z", "m"}));
}

TEST(Graph, CriticalArtifactsReachAnOutcome) {
  auto ext = ArtifactId{ArtifactKind::data, ContentHash::of("e")};
  auto g = parse_manifest(manifest(
      {step_json("a", R"({"i":{"pin":"data"}})", R"(["o","side"])"),
       step_json("b", R"({"i":{"artifact":")" + ext.str() + R"("}})", R"(["o"])"),
       step_json("c", R"({"i":{"step":"a","slot":"o"},"k":{"pin":"code"}})", R"(["o"])")},
      R"([{"step":"c","slot":"o"}])"));
  auto crit = critical_artifacts(g);
  EXPECT_TRUE(crit.contains(InputRef{PinnedComponent{"data"}}));
  EXPECT_TRUE(crit.contains(InputRef{PinnedComponent{"code"}}));
  EXPECT_FALSE(crit.contains(InputRef{ExternalArtifact{ext}}));
}

TEST(Graph, DotHasStepsEdgesAndOutcomes) {
  auto dot = to_dot(parse_manifest(test::kScoringFlow));
  EXPECT_EQ(dot.rfind("digraph", 0), 0u);
  EXPECT_NE(dot.find("\"step1\" -> \"step4\""), std::string::npos);
  EXPECT_NE(dot.find("doublecircle"), std::string::npos);
  EXPECT_NE(dot.find("pin:data"), std::string::npos);
}

struct FlowFixture : ::testing::Test {
  TestRepo repo;
  FlowGraph graph = parse_manifest(test::kScoringFlow);
  ArtifactVersionTuple tuple = test::baseline_tuple(repo.store());
  RecordingExecutor ex;
};

TEST_F(FlowFixture, ExecutesPartitionsAndMerge) {
  test::script_pure(ex, graph);
  auto run = execute(repo.ws.runs(), graph, tuple, ex, {});
  EXPECT_EQ(run.status, RunStatus::succeeded);
  ASSERT_EQ(run.step_outcomes.size(), 7u);
  std::vector<std::string> tasks;
  for (const auto& o : run.step_outcomes) tasks.push_back(o.task_name());
  EXPECT_EQ(tasks, (std::vector<std::string>{"step1", "step2", "step3", "step4[0]", "step4[1]", "step4[2]",
                                             "step4[merge]"}));
  const auto& merge = run.step_outcomes.back();
  EXPECT_EQ(merge.input_ids.size(), 3u);
  EXPECT_EQ(merge.command_rendered, "cat in/__partition_0 in/__partition_1 in/__partition_2 > out/scores");
  EXPECT_EQ(run.step_outcomes[3].command_rendered, "score --part 0 in/prepared in/model > out/scores");
  ASSERT_EQ(run.result_ids.size(), 1u);
  EXPECT_EQ(run.result_ids[0], merge.output_ids.at("scores"));
  EXPECT_EQ(run.result_ids[0].kind, ArtifactKind::result);
  EXPECT_EQ(run.step_outcomes[3].output_ids.at("scores").kind, ArtifactKind::data);
  EXPECT_EQ(repo.store().get(run.result_ids[0]),
            repo.store().get(run.step_outcomes[3].output_ids.at("scores")) +
                repo.store().get(run.step_outcomes[4].output_ids.at("scores")) +
                repo.store().get(run.step_outcomes[5].output_ids.at("scores")));
  EXPECT_EQ(repo.ws.runs().load(run.run_id), run);
  EXPECT_TRUE(run.skipped_steps.empty());
  EXPECT_FALSE(fs::exists(repo.ws.repo().work_dir() / run.run_id.str()));
}

TEST_F(FlowFixture, RunsAreDeterministic) {
  test::script_pure(ex, graph);
  auto a = execute(repo.ws.runs(), graph, tuple, ex, {});
  auto b = execute(repo.ws.runs(), graph, tuple, ex, {.parallelism = 1});
  EXPECT_NE(a.run_id, b.run_id);
  EXPECT_EQ(a.result_ids, b.result_ids);
}

TEST_F(FlowFixture, IndependentStepsRunConcurrently) {
  test::script_pure(ex, graph);
  std::atomic<int> active{0}, peak{0};
  for (auto name : {"step1", "step2"}) {
    ex.script(name, [&, name](const StepRequest& req) {
      int now = ++active;
      int p = peak.load();
      while (now > p && !peak.compare_exchange_weak(p, now)) {
      }
      // Wait for the sibling; a serial scheduler never gets here twice at once.
      auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
      while (peak.load() < 2 && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
      --active;
      return test::produce(req.outputs.front(), name);
    });
  }
  execute(repo.ws.runs(), graph, tuple, ex, {.parallelism = 4});
  EXPECT_EQ(peak.load(), 2);
}

TEST_F(FlowFixture, FailureStopsDispatchAndListsSkippedSteps) {
  test::script_pure(ex, graph);
  StepResult bad;
  bad.exit_code = 3;
  bad.log = "boom\n";
  ex.script("step1", bad);
  auto run = execute(repo.ws.runs(), graph, tuple, ex, {.parallelism = 1});
  EXPECT_EQ(run.status, RunStatus::failed);
  EXPECT_EQ(run.step_outcomes.size(), 1u);
  EXPECT_EQ(run.step_outcomes[0].exit_code, 3);
  EXPECT_TRUE(run.step_outcomes[0].output_ids.empty());
  EXPECT_EQ(repo.store().get(run.step_outcomes[0].log_id), "boom\n");
  EXPECT_EQ(run.skipped_steps, (std::vector<std::string>{"step2", "step3", "step4"}));
  EXPECT_TRUE(run.result_ids.empty());
}

TEST_F(FlowFixture, MissingOutputFailsTheTask) {
  test::script_pure(ex, graph);
  ex.script("step3", StepResult{});
  auto run = execute(repo.ws.runs(), graph, tuple, ex, {.parallelism = 1});
  EXPECT_EQ(run.status, RunStatus::failed);
  auto it = std::find_if(run.step_outcomes.begin(), run.step_outcomes.end(),
                         [](const auto& o) { return o.step == "step3"; });
  ASSERT_NE(it, run.step_outcomes.end());
  EXPECT_EQ(it->exit_code, -1);
  EXPECT_NE(repo.store().get(it->log_id).find("missing-output"), std::string::npos);
}

TEST_F(FlowFixture, ExecutorBreakdownPersistsFailedRunThenThrows) {
  test::script_pure(ex, graph);
  ex.script("step2", [](const StepRequest&) -> StepResult { throw Error(Errc::spawn_failure, "no shell"); });
  try {
    execute(repo.ws.runs(), graph, tuple, ex, {.parallelism = 1});
    FAIL() << "expected executor-failure";
  } catch (const ExecutorFailure& e) {
    EXPECT_EQ(e.code(), Errc::executor_failure);
    auto stored = repo.ws.runs().load(e.run().run_id);
    EXPECT_EQ(stored.status, RunStatus::failed);
  }
}

TEST_F(FlowFixture, UnresolvedPinFailsBeforeMinting) {
  test::script_pure(ex, graph);
  tuple.set({"data", "x9", ContentHash::of("not stored")});
  CA_EXPECT_ERROR(execute(repo.ws.runs(), graph, tuple, ex, {}), Errc::unresolved_input);
  tuple.set({"data", "x9", std::nullopt});
  CA_EXPECT_ERROR(execute(repo.ws.runs(), graph, tuple, ex, {}), Errc::unresolved_input);
  EXPECT_TRUE(repo.ws.runs().list().empty());
  EXPECT_TRUE(ex.calls().empty());
}

TEST_F(FlowFixture, InvalidGraphOrTupleIsRejected) {
  auto cyclic = parse_manifest(manifest({step_json("a", R"({"i":{"step":"a","slot":"o"}})", R"(["o"])")},
                                        R"([{"step":"a","slot":"o"}])"));
  CA_EXPECT_ERROR(execute(repo.ws.runs(), cyclic, tuple, ex, {}), Errc::cycle);
  ArtifactVersionTuple partial{{"code", "c", std::nullopt}};
  CA_EXPECT_ERROR(execute(repo.ws.runs(), graph, partial, ex, {}), Errc::invalid_tuple);
}

TEST_F(FlowFixture, EnvironmentIsWhitelisted) {
  auto g = parse_manifest(R"({"steps":[{"name":"a","command":"env","outputs":["o"]}],
                              "outcomes":[{"step":"a","slot":"o"}],"env_whitelist":["KEEP"]})");
  std::map<std::string, std::string> seen;
  ex.script("a", [&](const StepRequest& req) {
    seen = req.env;
    return test::produce("o", "x");
  });
  auto run = execute(repo.ws.runs(), g, tuple, ex,
                     {.environment = std::map<std::string, std::string>{{"KEEP", "1"}, {"DROP", "2"}}});
  EXPECT_EQ(seen, (std::map<std::string, std::string>{{"KEEP", "1"}}));
  EXPECT_EQ(repo.store().get(run.step_outcomes[0].env_snapshot_id), "KEEP=1\nengine=ca-engine/0.1.0\n");
}

TEST_F(FlowFixture, DataManifestIsPassedWhenScoped) {
  auto g = parse_manifest(R"({"steps":[{"name":"a","command":"wc -l {input:__data_manifest}","outputs":["o"]}],
                              "outcomes":[{"step":"a","slot":"o"}]})");
  std::string got;
  ex.script("a", [&](const StepRequest& req) {
    got = test::read_input(req, std::string(kDataManifestSlot));
    return test::produce("o", "x");
  });
  ExecuteOptions opts;
  opts.scope.manifest_id = repo.store().put(ArtifactKind::data, "item-0001\n");
  auto run = execute(repo.ws.runs(), g, tuple, ex, opts);
  EXPECT_EQ(got, "item-0001\n");
  EXPECT_EQ(run.step_outcomes[0].command_rendered, "wc -l in/__data_manifest");
  EXPECT_EQ(run.step_outcomes[0].input_ids.at(std::string(kDataManifestSlot)), *opts.scope.manifest_id);
}

}  // namespace
}  // namespace ca
