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

#include "ca/lineage.hpp"
#include "support.hpp"

namespace ca {
namespace {

using test::TestRepo;

ArtifactId art(const std::string& s) { return {ArtifactKind::data, ContentHash::of(s)}; }
RunId run(int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "aaaaaaaaaaaa-%06d", n);
  return RunId::parse(buf);
}

TEST(LineageNodeText, RoundTrips) {
  LineageNode a = art("x");
  LineageNode r = run(3);
  EXPECT_EQ(to_string(r), "run:aaaaaaaaaaaa-000003");
  EXPECT_EQ(parse_lineage_node(to_string(a)), a);
  EXPECT_EQ(parse_lineage_node(to_string(r)), r);
  LineageEdge e{a, r, EdgeRole::pinned};
  nlohmann::json j = e;
  EXPECT_EQ(j["role"], "pinned");
  EXPECT_EQ(j.get<LineageEdge>(), e);
}

TEST(LineageIndexTest, ProvenanceWalksBackThroughRuns) {
  // raw -> r1 -> mid -> r2 -> out ; cfg pinned into r2 ; unrelated -> r3 -> other
  std::vector<LineageEdge> edges = {
      {art("raw"), run(1), EdgeRole::consumed}, {run(1), art("mid"), EdgeRole::produced},
      {art("mid"), run(2), EdgeRole::consumed}, {art("cfg"), run(2), EdgeRole::pinned},
      {run(2), art("out"), EdgeRole::produced}, {art("unrelated"), run(3), EdgeRole::consumed},
      {run(3), art("other"), EdgeRole::produced}};
  LineageIndex idx(edges);
  std::set<LineageNode> expected{art("out"), run(2), art("mid"), art("cfg"), run(1), art("raw")};
  EXPECT_EQ(idx.provenance_of(art("out")), expected);
  EXPECT_EQ(idx.provenance_of(art("raw")), (std::set<LineageNode>{art("raw")}));
  EXPECT_EQ(idx.runs_using(art("mid")), (std::set<RunId>{run(2)}));
  EXPECT_EQ(idx.runs_using(art("cfg")), (std::set<RunId>{run(2)}));
  EXPECT_TRUE(idx.runs_using(art("out")).empty());
}

struct LineageFixture : ::testing::Test {
  TestRepo repo;
  FlowGraph graph = parse_manifest(test::kScoringFlow);
  ArtifactVersionTuple tuple = test::baseline_tuple(repo.store());
  RecordingExecutor ex;

  RunRecord run_once(ExecuteOptions opts = {}) {
    test::script_pure(ex, graph);
    if (!opts.flow_id) opts.flow_id = repo.ws.store_flow(test::kScoringFlow);
    return repo.ws.run_experiment(graph, tuple, ex, opts);
  }
};

TEST_F(LineageFixture, EdgesForRunClassifiesInputs) {
  auto r = run_once();
  auto edges = edges_for_run(repo.store(), r, r.step_outcomes);
  auto data = *resolve_pin(repo.store(), *tuple.find("data"));
  std::size_t consumed = 0, pinned = 0, produced = 0;
  for (const auto& e : edges) {
    if (e.role == EdgeRole::consumed) {
      ++consumed;
      EXPECT_EQ(std::get<ArtifactId>(e.from), data);
    } else if (e.role == EdgeRole::pinned) {
      ++pinned;
      EXPECT_EQ(std::get<ArtifactId>(e.from), data);
    } else {
      ++produced;
    }
  }
  EXPECT_EQ(consumed, 1u);  // intermediate outputs are not external inputs
  EXPECT_EQ(pinned, 1u);    // only the data pin carries content
  EXPECT_EQ(produced, 7u);  // step1..3, three partitions, merge
}

TEST_F(LineageFixture, RecordEdgesIsIdempotent) {
  auto r = run_once();
  EXPECT_EQ(repo.ws.lineage().record_edges(r, r.step_outcomes), 0u);
  auto lines = test::read_lines(repo.ws.repo().lineage_path());
  EXPECT_EQ(lines.size(), repo.ws.lineage().edges().size());
}

TEST_F(LineageFixture, WhoUsesAndProvenance) {
  auto first = run_once();
  auto second = run_once();
  auto data = *resolve_pin(repo.store(), *tuple.find("data"));
  EXPECT_EQ(repo.ws.lineage().runs_using(data), (std::vector<RunId>{first.run_id, second.run_id}));

  auto prov = repo.ws.lineage().provenance_of(first.result_ids[0]);
  EXPECT_TRUE(prov.contains(LineageNode{data}));
  EXPECT_TRUE(prov.contains(LineageNode{first.run_id}));
  EXPECT_TRUE(prov.contains(LineageNode{second.run_id}));  // same bytes, both produced it
}

TEST_F(LineageFixture, ReplayIdenticalThenDiverged) {
  auto original = run_once();
  auto same = replay_check(repo.ws, original.run_id, ex);
  EXPECT_TRUE(same.identical);
  EXPECT_TRUE(same.diverged.empty());
  EXPECT_EQ(same.replay.labels.at("replay-of"), original.run_id.str());
  EXPECT_EQ(same.replay.tuple, original.tuple);

  ex.script("step4[merge]", [](const StepRequest& req) {
    std::string merged;
    for (int i = 0; i < 3; ++i) merged += test::read_input(req, "__partition_" + std::to_string(i));
    merged[0] ^= 0x20;
    return test::produce("scores", merged);
  });
  auto diff = replay_check(repo.ws, original.run_id, ex);
  EXPECT_FALSE(diff.identical);
  ASSERT_EQ(diff.diverged.size(), 1u);
  EXPECT_EQ(diff.diverged[0].task, "step4[merge]");
  EXPECT_EQ(diff.diverged[0].slot, "scores");
  nlohmann::json j = diff;
  EXPECT_EQ(j["diverged"][0]["step"], "step4");
}

TEST_F(LineageFixture, ReplayNeedsInputsAndFlow) {
  auto original = run_once();
  auto data = *resolve_pin(repo.store(), *tuple.find("data"));
  fs::remove(repo.store().object_path(data.hash));
  CA_EXPECT_ERROR(replay_check(repo.ws, original.run_id, ex), Errc::missing_input);
  CA_EXPECT_ERROR(replay_check(repo.ws, RunId::parse("000000000000-000001"), ex), Errc::run_not_found);
}

TEST_F(LineageFixture, ReplayWithoutStoredFlowNeedsExplicitGraph) {
  test::script_pure(ex, graph);
  auto original = repo.ws.run_experiment(graph, tuple, ex, {});
  CA_EXPECT_ERROR(replay_check(repo.ws, original.run_id, ex), Errc::missing_input);
  EXPECT_TRUE(replay_check(repo.ws, original.run_id, ex, &graph).identical);
}

}  // namespace
}  // namespace ca
