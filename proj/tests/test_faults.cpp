// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "persistcheck/explore.hpp"

using namespace persistcheck;

namespace {

ScenarioRuntime make_rt(const std::string& profile, std::vector<std::string> files,
                        Workload w, int max_faults = 0) {
  ScenarioRuntime rt;
  rt.profile = profile_from_name(profile);
  rt.initial = make_initial_state(files);
  rt.workload = std::move(w);
  rt.max_faults = max_faults;
  return rt;
}

// Media shape of one crash outcome for page 2:0 and txn 1:
// (data at v1, log block present, commit record present, covered count).
std::tuple<bool, bool, bool, std::size_t> shape(const CrashOutcome& o) {
  std::size_t covered = 0;
  for (const auto& t : o.txns)
    if (t.id == 1) covered = t.covered.size();
  return {o.media.page_content(PageKey{2, 0}) == ContentVersion{1},
          o.media.log_blocks.count(1) == 1, o.media.commit_records.count(1) == 1,
          covered};
}

}  // namespace

TEST_CASE("schedule enumeration is breadth-first over discovered opportunities") {
  ScenarioRuntime rt =
      make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}}, 1);
  std::vector<RunResult> runs = explore_schedules(rt);
  REQUIRE(runs.size() == 6);  // fault-free plus one singleton per opportunity
  CHECK(runs[0].schedule.decisions.empty());
  for (std::size_t i = 1; i < runs.size(); ++i) {
    CHECK(runs[i].schedule.fault_count() == 1);
    CHECK(runs[i].schedule.decisions.size() == i);  // injection at position i-1
    CHECK(runs[i].schedule.decisions.back() == 1);
  }
  REQUIRE(runs[0].opportunities.size() == 5);
  CHECK(runs[0].opportunities[0].site == "data 2:0:v1");
  CHECK(runs[0].opportunities[4].site == "flush post");
}

TEST_CASE("an aborted journal cuts the opportunity tree short") {
  ScenarioRuntime rt =
      make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}}, 2);
  std::vector<RunResult> runs = explore_schedules(rt);
  // Pairs extend only the F1 singleton, and even there the failed fsync
  // skips its post flush: 6 schedules of at most one fault plus 3 pairs.
  CHECK(runs.size() == 9);
  for (const RunResult& run : runs) CHECK(run.schedule.fault_count() <= 2);
}

TEST_CASE("a fault-free write+fsync flips durable exactly at the fsync") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  CHECK(run.durable_at == std::vector<bool>{false, false, true});
  CHECK(run.clean_at == std::vector<bool>{true, false, true});
  REQUIRE(run.step_results.size() == 2);
  CHECK(run.step_results[0] == TraceRecord{"write", "ok"});
  CHECK(run.step_results[1] == TraceRecord{"fsync", "ok"});
}

TEST_CASE("crash outcomes of a bare write match the hand enumeration") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  std::vector<CrashOutcome> outcomes =
      crash_states(run.final_state, rt.device, rt.profile, false, 1);
  REQUIRE(outcomes.size() == 6);

  // (data v1, log, commit, covered): kernel commit and writeback choices
  // yield exactly these surviving images.
  std::multiset<std::tuple<bool, bool, bool, std::size_t>> got;
  for (const CrashOutcome& o : outcomes) got.insert(shape(o));
  std::multiset<std::tuple<bool, bool, bool, std::size_t>> want{
      {false, false, false, 0},  // nothing reached media
      {true, false, false, 0},   // bare data writeback, no commit
      {false, true, false, 0},   // log block only, commit lost
      {false, true, true, 0},    // committed with data never submitted
      {true, true, false, 1},    // covered data flushed, record lost
      {true, true, true, 1}};    // fully committed with its data
  CHECK(got == want);

  // The committed-without-data image is the delayed-allocation hazard: the
  // binding side is fine, the content is stale, and nothing flags it.
  for (const CrashOutcome& o : outcomes) {
    if (shape(o) != std::tuple<bool, bool, bool, std::size_t>{false, true, true, 0})
      continue;
    RecoveredState rec = recover(o, run.final_state);
    CHECK(rec.inconsistencies.empty());
    CHECK(rec.state.device.media.page_content(PageKey{2, 0}) == ContentVersion{0});
    CHECK(rec.state.resolve("f") == InodeId{2});
  }
}

TEST_CASE("outcomes carry the lexicographically smallest plan that reaches them") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  std::vector<CrashOutcome> outcomes =
      crash_states(run.final_state, rt.device, rt.profile, false, 1);
  std::vector<CrashPlan> plans;
  for (const CrashOutcome& o : outcomes) plans.push_back(o.plan);
  std::vector<CrashPlan> want{{1, 0, 0, 0}, {1, 0, 1, 1}, {1, 1, 0, 0},
                              {1, 1, 0, 1}, {1, 1, 1, 0}, {1, 1, 1, 1}};
  CHECK(plans == want);

  // Enumerating twice is deterministic down to the recovered states.
  std::vector<CrashOutcome> again =
      crash_states(run.final_state, rt.device, rt.profile, false, 1);
  REQUIRE(again.size() == outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    CHECK(again[i].plan == outcomes[i].plan);
    CHECK(to_canonical_string(recover(again[i], run.final_state).state) ==
          to_canonical_string(recover(outcomes[i], run.final_state).state));
  }
}

TEST_CASE("ordered commits keep covered data ahead of the record on media") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  for (const CrashOutcome& o :
       crash_states(run.final_state, rt.device, rt.profile, false, 1)) {
    auto [v1, log, commit, covered] = shape(o);
    if (covered > 0 && commit) CHECK(v1);  // the pre-record flush did its job
    if (commit) CHECK(log);                // record never overtakes its log block
  }
}

TEST_CASE("writeback lets a commit record overtake both log and data") {
  ScenarioRuntime rt = make_rt("ext4-writeback", {"f"}, {OpWrite{"f", 0}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  std::vector<CrashOutcome> outcomes =
      crash_states(run.final_state, rt.device, rt.profile, false, 1);
  CHECK(outcomes.size() == 8);  // every (data, log, commit) survival combination

  bool commit_without_log = false, commit_without_data = false;
  for (const CrashOutcome& o : outcomes) {
    auto [v1, log, commit, covered] = shape(o);
    CHECK(covered == 0);  // writeback never promises data coverage
    if (commit && !log) commit_without_log = true;
    if (commit && !v1) commit_without_data = true;
  }
  CHECK(commit_without_log);
  CHECK(commit_without_data);
}

TEST_CASE("data-journal crash outcomes are all-or-nothing") {
  ScenarioRuntime rt =
      make_rt("ext4-journal", {"f", "g"}, {OpWrite{"f", 0}, OpWrite{"g", 0}});
  RunResult run = run_schedule(rt, FaultSchedule{});
  std::vector<CrashOutcome> outcomes =
      crash_states(run.final_state, rt.device, rt.profile, false, 2);
  REQUIRE(!outcomes.empty());
  bool saw_old = false, saw_new = false;
  for (const CrashOutcome& o : outcomes) {
    CHECK(o.plan.dirty_mask == 0);  // data rides the log, never writeback
    RecoveredState rec = recover(o, run.final_state);
    ContentVersion f = rec.state.device.media.page_content(PageKey{2, 0});
    ContentVersion g = rec.state.device.media.page_content(PageKey{3, 0});
    CHECK(f == g);  // both files move together or not at all
    (f == ContentVersion{0} ? saw_old : saw_new) = true;
  }
  CHECK(saw_old);
  CHECK(saw_new);
}

TEST_CASE("an interrupted rename recovers to exactly one side") {
  ScenarioRuntime rt =
      make_rt("ext4-ordered", {"f"}, {OpRename{"f", "g"}, OpFsyncDir{}});
  rt.crash_positions = {1};  // after the rename, before fsync of the directory
  RunResult run = run_schedule(rt, FaultSchedule{});
  bool saw_from = false, saw_to = false;
  int visits = 0;
  for_each_crash(rt, run, [&](const CrashOutcome&, const RecoveredState& rec) {
    ++visits;
    bool from = rec.state.resolve("f") == InodeId{2};
    bool to = rec.state.resolve("g") == InodeId{2};
    CHECK(from != to);  // never both, never neither
    (from ? saw_from : saw_to) = true;
  });
  CHECK(visits == 3);
  CHECK(saw_from);
  CHECK(saw_to);
}

TEST_CASE("mount flags a committed transaction whose data never arrived") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}});
  FaultSchedule sched;
  sched.decisions = {1};  // the data submission fails, the commit proceeds
  RunResult run = run_schedule(rt, sched);
  REQUIRE(run.step_results.back() == TraceRecord{"fsync", "EIO"});
  // The failed fsync skipped its post flush, so the commit record is still
  // in the device cache; the log block went out under the pre-record flush.
  CHECK(run.final_state.device.media.log_blocks.count(1) == 1);
  REQUIRE(run.final_state.device.cache.size() == 1);
  CHECK(run.final_state.device.cache[0].kind == BlockKind::JournalCommit);
  CHECK(run.final_state.device.media.page_content(PageKey{2, 0}) == ContentVersion{0});

  // Power loss that keeps the cached commit record: metadata says the data
  // is covered, media never received it.
  CrashOutcome o = apply_crash_plan(run.final_state, rt.device, rt.profile, false,
                                    CrashPlan{2, 0, 0, 1});
  RecoveredState rec = recover(o, run.final_state);
  REQUIRE(rec.inconsistencies.size() == 1);
  CHECK(rec.inconsistencies[0].find("txn 1") != std::string::npos);
  CHECK(rec.state.device.media.page_content(PageKey{2, 0}) == ContentVersion{0});

  WriteSet ws;
  ws.pages.push_back(PageWrite{PageKey{2, 0}, ContentVersion{1}});
  CHECK_FALSE(durable(rec.state, ws));
}

TEST_CASE("a crash at position zero recovers the initial image") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}});
  rt.crash_positions = {0};
  RunResult run = run_schedule(rt, FaultSchedule{});
  int visits = 0;
  for_each_crash(rt, run, [&](const CrashOutcome& o, const RecoveredState& rec) {
    ++visits;
    CHECK(o.media == rt.initial.device.media);
    CHECK(rec.state.ns_mem == rt.initial.ns_mem);
    CHECK(rec.inconsistencies.empty());
  });
  CHECK(visits == 1);
}

TEST_CASE("a crash plan ends the run at its step position") {
  ScenarioRuntime rt = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}});
  FaultSchedule sched;
  sched.crash = CrashPlan{1, 0, 0, 0};
  RunResult run = run_schedule(rt, sched, false, true);
  CHECK(run.executed_steps() == 1);  // the fsync never ran
  CHECK(run.durable_at.size() == 2);
  CHECK(run.states_at.size() == 2);
  REQUIRE(run.crash.has_value());
  REQUIRE(run.recovered.has_value());
  CHECK(run.final_state.trace.size() == 1);
}

TEST_CASE("durability never regresses within an uncrashed run") {
  for (const std::string& profile :
       {std::string("ext4-ordered"), std::string("btrfs"), std::string("restore-dirty")}) {
    ScenarioRuntime rt = make_rt(
        profile, {"f"},
        {OpWrite{"f", 0}, OpFsync{"f"}, OpWrite{"f", 0}, OpFsync{"f", true}}, 2);
    for_each_schedule(rt, [&](const RunResult& run) {
      for (std::size_t i = 0; i + 1 < run.durable_at.size(); ++i) {
        INFO(profile << " schedule " << to_string(run.schedule));
        CHECK_FALSE((run.durable_at[i] && !run.durable_at[i + 1]));
      }
    });
  }
}

TEST_CASE("enumeration bounds turn runaway exploration into config errors") {
  ScenarioRuntime rt =
      make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}, OpFsync{"f"}}, 1);
  CHECK_THROWS_AS(for_each_schedule(rt, [](const RunResult&) {}, 3), ConfigError);

  ScenarioRuntime bare = make_rt("ext4-ordered", {"f"}, {OpWrite{"f", 0}});
  RunResult run = run_schedule(bare, FaultSchedule{});
  CHECK_THROWS_AS(
      crash_states(run.final_state, bare.device, bare.profile, false, 1, 3),
      ConfigError);

  Workload wide;
  for (PageIndex i = 0; i < 17; ++i) wide.push_back(OpWrite{"f", i});
  ScenarioRuntime fat = make_rt("ext4-ordered", {"f"}, wide);
  RunResult fatrun = run_schedule(fat, FaultSchedule{});
  CHECK_THROWS_AS(
      crash_states(fatrun.final_state, fat.device, fat.profile, false, 17),
      ConfigError);
}

TEST_CASE("fault schedules render their decisions and crash plan") {
  FaultSchedule sched;
  sched.decisions = {0, 0, 1};
  sched.crash = CrashPlan{2, 1, 0, 3};
  CHECK(to_string(sched) == "[001] crash(step=2, commit=1, dirty=0, subset=3)");
  CHECK(sched.fault_count() == 1);
  CHECK(to_string(FaultSchedule{}) == "[]");
}
