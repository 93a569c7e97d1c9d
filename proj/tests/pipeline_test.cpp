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

#include "ca/pipeline.hpp"
#include "support.hpp"

namespace ca {
namespace {

using test::TestRepo;

// Reference values recomputed with Python hashlib from the selection rule.
TEST(Subset, MatchesReferenceSelection) {
  auto ids = test::item_ids(1000);
  auto picked = subset_select(ids, 0.1, 42);
  std::vector<int> expected = {
      3,   29,  41,  47,  50,  55,  69,  79,  86,  108, 115, 117, 135, 136, 153, 157, 160, 163, 165,
      169, 201, 208, 210, 218, 238, 244, 248, 256, 274, 284, 308, 331, 340, 346, 355, 360, 363, 388,
      405, 425, 429, 430, 438, 439, 450, 455, 480, 488, 504, 514, 526, 546, 553, 560, 563, 565, 568,
      597, 601, 655, 660, 662, 684, 698, 708, 709, 753, 764, 775, 782, 786, 787, 802, 811, 812, 819,
      839, 865, 867, 875, 879, 884, 889, 890, 904, 931, 940, 941, 952, 961, 979, 981, 992};
  ASSERT_EQ(picked.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(picked[i], ids[expected[i]]);

  auto other = subset_select(ids, 0.1, 43);
  ASSERT_EQ(other.size(), 110u);
  EXPECT_EQ(other[0], ids[37]);
  EXPECT_EQ(other[1], ids[39]);
  EXPECT_EQ(other[2], ids[53]);
  EXPECT_EQ(other.back(), ids[996]);
}

TEST(Subset, FallbackKeepsSmallestDigest) {
  EXPECT_EQ(subset_select({"a", "b", "c"}, 0.000001, 7), (std::vector<std::string>{"b"}));
}

TEST(Subset, FullFractionIsIdentityAndEmptyIsAnError) {
  auto ids = test::item_ids(50);
  EXPECT_EQ(subset_select(ids, 1.0, 5), ids);
  CA_EXPECT_ERROR(subset_select({}, 0.5, 0), Errc::empty_manifest);
  CA_EXPECT_ERROR(subset_select(ids, 0.0, 0), Errc::invalid_argument);
  CA_EXPECT_ERROR(subset_select(ids, 1.5, 0), Errc::invalid_argument);
}

TEST(Subset, ItemManifestParsing) {
  EXPECT_EQ(parse_item_manifest("a\n\nb\r\nc"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(parse_item_manifest("").empty());
}

BranchPins main_pins() {
  return {"main",
          {{"code", "c1", std::nullopt},
           {"data", "x1", std::nullopt},
           {"dependencies", "d1", std::nullopt},
           {"deployment", "y1", std::nullopt}},
          std::nullopt,
          {}};
}

ChangeEvent event(const std::string& id, Source src, const std::string& version,
                  const std::string& ref = "working/x") {
  return {id, src, ref, {std::string(to_string(src)), version, std::nullopt}, ""};
}

TEST(ResolveTuple, SubstitutesOnlyTheEventComponent) {
  auto current = main_pins();
  auto t = resolve_tuple(event("e", Source::data, "x2"), current);
  auto diff = diff_tuples(current.pins, t);
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff[0].component, "data");
  EXPECT_EQ(t.find("data")->version, "x2");

  auto code = resolve_tuple(event("e", Source::code, "c2"), current);
  EXPECT_EQ(diff_tuples(current.pins, code).size(), 1u);
  EXPECT_EQ(resolve_tuple(event("e", Source::data, "x1"), current), current.pins);

  current.pins.erase("deployment");
  CA_EXPECT_ERROR(resolve_tuple(event("e", Source::data, "x2"), current), Errc::incomplete_pins);
}

struct PipelineFixture : ::testing::Test {
  TestRepo repo;
  FlowGraph flow = parse_manifest(test::kEvaluatedFlow);
  ArtifactId flow_id = repo.ws.store_flow(test::kEvaluatedFlow);
  RecordingExecutor ex;
  Pipeline pipeline{repo.ws, PipelineOptions{.subset_fraction = 0.1,
                                             .subset_seed = 0,
                                             .parallelism = 4,
                                             .gate = GatePolicy{{{"accuracy", Comparator::ge, 0.9}}}}};

  void SetUp() override {
    auto base = test::baseline_tuple(repo.store(), "x1", 200);
    for (const auto& [_, pin] : base.pins()) pipeline.set_pin("main", pin);
    test::script_pure(ex, flow);
    test::script_metrics(ex, R"({"accuracy":0.91})");
  }

  ChangeEvent data_event(const std::string& id, int items = 300) {
    auto data = repo.store().put(ArtifactKind::data, test::item_manifest(items, 5000));
    return {id, Source::data, "working/x", {"data", "x2", data.hash}, ""};
  }

  std::string pins_bytes() { return io::read_file(repo.ws.repo().pins_path()); }
};

TEST_F(PipelineFixture, IngestPlansValidationOnBranch) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  EXPECT_EQ(plan.branch, "working/x");
  auto diff = diff_tuples(plan.base, plan.tuple);
  ASSERT_EQ(diff.size(), 1u);
  EXPECT_EQ(diff[0].after->version, "x2");
  EXPECT_EQ(pipeline.branch("working/x")->pins, plan.tuple);
  EXPECT_EQ(pipeline.branch("main")->pins, plan.base);
  EXPECT_EQ(pipeline.events().size(), 1u);
  EXPECT_FALSE(pipeline.events()[0].at.empty());
}

TEST_F(PipelineFixture, ReingestIsIdempotent) {
  auto first = pipeline.ingest_event(data_event("e1"));
  auto pins_before = pins_bytes();
  auto second = pipeline.ingest_event(data_event("e1", 999));
  EXPECT_EQ(first, second);
  EXPECT_EQ(pipeline.events().size(), 1u);
  EXPECT_EQ(pipeline.plans().size(), 1u);
  EXPECT_EQ(pins_bytes(), pins_before);
}

TEST_F(PipelineFixture, MalformedEventsAndUnknownBranches) {
  auto ev = event("e", Source::code, "c2");
  ev.new_pin.component = "data";
  CA_EXPECT_ERROR(pipeline.ingest_event(ev), Errc::malformed_event);
  CA_EXPECT_ERROR(pipeline.ingest_event(event("", Source::code, "c2")), Errc::malformed_event);

  TestRepo empty;
  Pipeline bare(empty.ws);
  CA_EXPECT_ERROR(bare.ingest_event(event("e", Source::code, "c2")), Errc::unknown_branch);
  bare.set_pin("main", {"code", "c1", std::nullopt});
  CA_EXPECT_ERROR(bare.ingest_event(event("e", Source::code, "c2")), Errc::incomplete_pins);
}

TEST_F(PipelineFixture, BranchEventsBuildOnBranchPins) {
  pipeline.ingest_event(data_event("e1"));
  auto plan = pipeline.ingest_event(event("e2", Source::code, "c2"));
  EXPECT_EQ(plan.tuple.find("data")->version, "x2");
  EXPECT_EQ(plan.tuple.find("code")->version, "c2");
  auto main_event = pipeline.ingest_event(event("e3", Source::code, "c9", "main"));
  EXPECT_EQ(main_event.tuple.find("data")->version, "x1");
  EXPECT_EQ(pipeline.branch("main")->pins.find("code")->version, "c1");
}

TEST_F(PipelineFixture, ValidationUsesSubsetAndLabels) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  auto run = pipeline.run_validation(plan, flow, ex, flow_id);
  EXPECT_EQ(run.status, RunStatus::succeeded);
  EXPECT_EQ(run.kind, RunKind::validation);
  EXPECT_EQ(run.branch, "working/x");
  EXPECT_EQ(run.labels.at("event_id"), "e1");
  EXPECT_EQ(run.labels.at("branch"), "working/x");
  EXPECT_EQ(run.data_scope.mode, DataScope::Mode::subset);
  ASSERT_TRUE(run.data_scope.manifest_id);
  auto subset = parse_item_manifest(repo.store().get(*run.data_scope.manifest_id));
  auto full = parse_item_manifest(test::item_manifest(300, 5000));
  EXPECT_EQ(subset, subset_select(full, 0.1, 0));
  EXPECT_LT(subset.size(), full.size());
}

TEST_F(PipelineFixture, ApproveReleaseUpdatesMain) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  auto validation = pipeline.run_validation(plan, flow, ex, flow_id);
  auto req = pipeline.approve(validation.run_id, "alice");
  EXPECT_EQ(req.decision, Decision::approved);
  CA_EXPECT_ERROR(pipeline.approve(validation.run_id, "bob"), Errc::already_decided);
  CA_EXPECT_ERROR(pipeline.reject(validation.run_id, "bob", "late"), Errc::already_decided);

  auto release = pipeline.run_release(validation.run_id, ex);
  EXPECT_EQ(release.status, RunStatus::succeeded);
  EXPECT_EQ(release.kind, RunKind::release);
  EXPECT_EQ(release.branch, "main");
  EXPECT_EQ(release.tuple, validation.tuple);
  EXPECT_EQ(release.data_scope.mode, DataScope::Mode::full);
  EXPECT_EQ(release.labels.at("promoted-from"), validation.run_id.str());

  auto main = *pipeline.branch("main");
  EXPECT_EQ(main.pins, validation.tuple);
  EXPECT_EQ(main.last_release_run, release.run_id);
  EXPECT_EQ(main.result_refs, release.result_ids);
  EXPECT_TRUE(aligned(validation.tuple, release.tuple));

  CA_EXPECT_ERROR(pipeline.run_release(validation.run_id, ex), Errc::already_released);
}

TEST_F(PipelineFixture, GatekeepingLeavesMainUntouched) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  auto snapshot = pins_bytes();

  test::script_metrics(ex, R"({"accuracy":0.5})");
  auto weak = pipeline.run_validation(plan, flow, ex, flow_id);
  CA_EXPECT_ERROR(pipeline.approve(weak.run_id, "alice"), Errc::gate_failed);

  StepResult broken;
  broken.exit_code = 1;
  ex.script("evaluate", broken);
  auto failed = pipeline.run_validation(plan, flow, ex, flow_id);
  EXPECT_EQ(failed.status, RunStatus::failed);
  CA_EXPECT_ERROR(pipeline.approve(failed.run_id, "alice"), Errc::run_not_succeeded);
  CA_EXPECT_ERROR(pipeline.run_release(failed.run_id, ex), Errc::not_approved);
  CA_EXPECT_ERROR(pipeline.approve(RunId::parse("000000000000-000001"), "alice"), Errc::run_not_found);

  pipeline.reject(weak.run_id, "alice", "accuracy too low");
  CA_EXPECT_ERROR(pipeline.run_release(weak.run_id, ex), Errc::not_approved);
  EXPECT_EQ(pins_bytes(), snapshot);
}

TEST_F(PipelineFixture, FailedReleaseKeepsMainPins) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  auto validation = pipeline.run_validation(plan, flow, ex, flow_id);
  pipeline.approve(validation.run_id, "alice");
  auto snapshot = pins_bytes();

  StepResult broken;
  broken.exit_code = 2;
  ex.script("step1", broken);
  auto release = pipeline.run_release(validation.run_id, ex);
  EXPECT_EQ(release.status, RunStatus::failed);
  EXPECT_EQ(pins_bytes(), snapshot);

  // A retry after fixing the step may still succeed.
  test::script_pure(ex, flow);
  test::script_metrics(ex, R"({"accuracy":0.91})");
  EXPECT_EQ(pipeline.run_release(validation.run_id, ex).status, RunStatus::succeeded);
  EXPECT_NE(pins_bytes(), snapshot);
}

TEST_F(PipelineFixture, ReleaseRequiresValidationRun) {
  auto plan = pipeline.ingest_event(data_event("e1"));
  auto validation = pipeline.run_validation(plan, flow, ex, flow_id);
  pipeline.approve(validation.run_id, "alice");
  auto release = pipeline.run_release(validation.run_id, ex);
  CA_EXPECT_ERROR(pipeline.approve(release.run_id, "alice"), Errc::invalid_argument);
}

}  // namespace
}  // namespace ca
