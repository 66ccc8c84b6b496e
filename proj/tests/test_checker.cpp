// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <string>
#include <vector>

#include "persistcheck/checks.hpp"

using namespace persistcheck;

namespace {

Scenario load(const std::string& name) {
  return load_scenario(std::string(PCK_SCENARIO_DIR) + "/" + name + ".json");
}

std::vector<bool> decisions_of(const Json& schedule_json) {
  return schedule_json["decisions"].get<std::vector<bool>>();
}

// Definitional re-derivation of the three durability claims from nothing but
// the raw schedule enumeration, ignoring how the checks search.
struct OracleAnswers {
  bool trace_pair_exists = false;   // one trace, both durability outcomes
  bool clean_witness_exists = false;  // issued, clean, not durable somewhere
  bool commit_step_exists = false;  // some step durable under every schedule
};

OracleAnswers naive_oracle(const Scenario& sc) {
  ScenarioRuntime rt = to_runtime(sc);
  std::map<std::string, std::set<bool>> outcomes_by_trace;
  std::vector<bool> universal(rt.workload.size() + 1, true);
  OracleAnswers o;
  for_each_schedule(rt, [&](const RunResult& run) {
    outcomes_by_trace[trace_to_string(run.step_results)].insert(run.durable_at.back());
    for (std::size_t k = 0; k < run.durable_at.size(); ++k) {
      if (!run.durable_at[k]) universal[k] = false;
      if (run.clean_at[k] && run.issued_at[k] && !run.durable_at[k])
        o.clean_witness_exists = true;
    }
  });
  for (const auto& [trace, durables] : outcomes_by_trace)
    if (durables.size() == 2) o.trace_pair_exists = true;
  for (bool u : universal)
    if (u) o.commit_step_exists = true;
  return o;
}

}  // namespace

TEST_CASE("bundled scenarios keep their verdicts") {
  const std::vector<std::tuple<std::string, std::string, Verdict>> table{
      {"lemma-ext4", "commit-boundary", Verdict::WitnessFound},
      {"lemma-ext4", "no-commit-time", Verdict::Violated},
      {"lemma-ext4", "clean-not-durable", Verdict::WitnessFound},
      {"retry-nonsound", "retry-soundness", Verdict::Violated},
      {"prefix-violation", "prefix-consistency", Verdict::Violated},
      {"wsr-full", "write-sync-rename", Verdict::Holds},
      {"wsr-drop2", "write-sync-rename", Verdict::Violated},
      {"wsr-drop4", "write-sync-rename", Verdict::Violated},
      {"flush-noop", "flush-noop", Verdict::Holds},
      {"plp-equivalence", "plp-equivalence", Verdict::Holds},
      {"mv-crossfs", "completeness", Verdict::StructurallyIncomplete},
      {"fua-everything", "no-commit-time", Verdict::Holds},
  };
  for (const auto& [scenario, check, want] : table) {
    CheckReport rep = run_check(load(scenario), check);
    INFO(scenario << " / " << check);
    CHECK(rep.verdict == want);
    CHECK(rep.check == check);
    CHECK(rep.scenario == scenario);
  }
}

TEST_CASE("commit-boundary finds the minimal pair and revalidates it") {
  CheckReport rep = run_check(load("lemma-ext4"), "commit-boundary");
  REQUIRE(rep.verdict == Verdict::WitnessFound);
  CHECK(rep.details["schedules_explored"] == 9);
  CHECK(rep.details["distinct_traces"] == 2);

  const Json& w = rep.details["witness"];
  CHECK(w["revalidated"] == true);
  CHECK(decisions_of(w["lost"]["schedule"]) == std::vector<bool>{false, false, true});
  CHECK(decisions_of(w["kept"]["schedule"]) ==
        std::vector<bool>{false, false, false, false, true});

  REQUIRE(rep.witnesses.size() == 2);
  const WitnessRun& lost = rep.witnesses[0];
  const WitnessRun& kept = rep.witnesses[1];
  CHECK(lost.label == "durability-lost");
  CHECK(kept.label == "durability-kept");
  CHECK_FALSE(lost.durable);
  CHECK(kept.durable);
  CHECK(lost.trace == kept.trace);
  CHECK(trace_to_string(lost.trace) == "[(write, ok), (fsync, EIO)]");

  // Both witnesses replay to exactly what the report claims.
  ScenarioRuntime rt = to_runtime(load("lemma-ext4"));
  for (const WitnessRun& wit : rep.witnesses) {
    RunResult run = run_schedule(rt, wit.schedule);
    CHECK(run.step_results == wit.trace);
    CHECK(run.durable_at.back() == wit.durable);
  }
}

TEST_CASE("no-commit-time refutes every candidate step on a volatile stack") {
  CheckReport rep = run_check(load("lemma-ext4"), "no-commit-time");
  REQUIRE(rep.verdict == Verdict::Violated);
  CHECK(rep.details["candidates"].empty());
  CHECK(rep.details["commit_step"].is_null());
  CHECK(rep.details["refuted_step"] == 2);  // fault-free looks durable there
  CHECK(decisions_of(rep.details["counterexample"]) ==
        std::vector<bool>{false, false, true});
  REQUIRE(rep.witnesses.size() == 1);
  CHECK(rep.witnesses[0].label == "still-volatile");
  CHECK_FALSE(rep.witnesses[0].durable);
}

TEST_CASE("no-commit-time accepts the fsync step when every write is FUA") {
  CheckReport rep = run_check(load("fua-everything"), "no-commit-time");
  REQUIRE(rep.verdict == Verdict::Holds);
  CHECK(rep.details["commit_step"] == 2);
  CHECK(rep.details["commit_step_op"] == "fsync");
  CHECK(rep.details["candidates"] == Json::array({2}));
  CHECK(rep.witnesses.empty());
}

TEST_CASE("clean-not-durable needs the writes issued first") {
  CheckReport rep = run_check(load("lemma-ext4"), "clean-not-durable");
  REQUIRE(rep.verdict == Verdict::WitnessFound);
  const Json& w = rep.details["witness"];
  // The minimal witness is the failed pre-commit flush, not the untouched
  // initial state: data submitted and clean, still in the device cache.
  CHECK(decisions_of(w["schedule"]) == std::vector<bool>{false, false, true});
  CHECK(w["after_step"] == 2);
  CHECK(w["clean"] == true);
  CHECK(w["issued"] == true);
  CHECK(w["durable"] == false);
  REQUIRE(rep.witnesses.size() == 1);
  CHECK(trace_to_string(rep.witnesses[0].trace) == "[(write, ok), (fsync, EIO)]");
}

TEST_CASE("retry-soundness shows the ok retry persists nothing") {
  CheckReport rep = run_check(load("retry-nonsound"), "retry-soundness");
  REQUIRE(rep.verdict == Verdict::Violated);
  CHECK(rep.details["retry_result"] == "ok");
  CHECK(rep.details["durable_after_retry"] == false);
  CHECK(decisions_of(rep.details["forced_schedule"]) == std::vector<bool>{true});

  // The control profile that restores dirty bits really does commit.
  CHECK(rep.details["control"]["profile"] == "restore-dirty");
  CHECK(rep.details["control"]["retry_result"] == "ok");
  CHECK(rep.details["control"]["durable_after_retry"] == true);

  REQUIRE(rep.witnesses.size() == 2);
  CHECK(rep.witnesses[0].label == "retry-unsound");
  CHECK_FALSE(rep.witnesses[0].durable);
  CHECK(trace_to_string(rep.witnesses[0].trace) ==
        "[(write, ok), (fsync, EIO), (fsync, ok)]");
  CHECK(rep.witnesses[1].label == "control-restore-dirty");
  CHECK(rep.witnesses[1].durable);
  CHECK(trace_to_string(rep.witnesses[1].trace) ==
        "[(write, ok), (fsync, EIO), (fsync, ok)]");
}

TEST_CASE("prefix-consistency sees the metadata-before-data hole") {
  CheckReport rep = run_check(load("prefix-violation"), "prefix-consistency");
  REQUIRE(rep.verdict == Verdict::Violated);
  CHECK(rep.details["reflected_sets"] == Json::array({"00", "01", "10", "11"}));
  CHECK(rep.details["violating_sets"] == Json::array({"01"}));
  CHECK(rep.details["witness"]["reflected"] == "01");

  // data=journal control: one global transaction, only prefixes survive.
  const Json& control = rep.details["control"];
  CHECK(control["profile"] == "ext4-journal");
  CHECK(control["all_prefixes"] == true);
  CHECK(control["reflected_sets"] == Json::array({"00", "10", "11"}));
  CHECK(control["violating_sets"].empty());
}

TEST_CASE("the full replace-via-rename recipe survives every crash") {
  CheckReport rep = run_check(load("wsr-full"), "write-sync-rename");
  REQUIRE(rep.verdict == Verdict::Holds);
  CHECK(rep.details["violations"] == 0);
  CHECK(rep.details["complete_old"].get<std::uint64_t>() > 0);
  CHECK(rep.details["complete_new"].get<std::uint64_t>() > 0);
  CHECK(rep.details["new_state_durable_at_end"] == true);
  CHECK(rep.details["old_inode"] == 2);
  CHECK(rep.details["new_inode"] == 3);
}

TEST_CASE("dropping the fsync tears the replace despite the fsync-dir") {
  CheckReport rep = run_check(load("wsr-drop2"), "write-sync-rename");
  REQUIRE(rep.verdict == Verdict::Violated);
  CHECK(rep.details["violations"] == 1);
  CHECK(rep.details["new_state_durable_at_end"] == true);  // binding, not data
  const Json& w = rep.details["witness"];
  CHECK(w["what"] == "target bound to new inode but content is v0, expected v1");
  CHECK(w["schedule"]["crash"] ==
        Json({{"after_step", 3}, {"commit_mask", 4}, {"dirty_mask", 0},
              {"subset_mask", 1}}));
}

TEST_CASE("dropping the fsync-dir leaves the new name volatile") {
  CheckReport rep = run_check(load("wsr-drop4"), "write-sync-rename");
  REQUIRE(rep.verdict == Verdict::Violated);
  CHECK(rep.details["violations"] == 1);
  CHECK(rep.details["new_state_durable_at_end"] == false);
  CHECK(rep.details["complete_old"] == 23);
  CHECK(rep.details["complete_new"] == 2);
  const Json& w = rep.details["witness"];
  CHECK(decisions_of(w["schedule"]) == std::vector<bool>{true});
  CHECK(w["schedule"]["crash"]["after_step"] == 4);
  CHECK(w["what"] == "target bound to new inode but content is v0, expected v1");
}

TEST_CASE("flush on a cache-less device is a successful no-op") {
  CheckReport rep = run_check(load("flush-noop"), "flush-noop");
  REQUIRE(rep.verdict == Verdict::Holds);
  CHECK(rep.details["flush_succeeded"] == true);
  CHECK(rep.details["cache_empty"] == true);
  CHECK(rep.details["media_unchanged"] == true);
  CHECK(rep.details["barrier_epoch_after"].get<int>() ==
        rep.details["barrier_epoch_before"].get<int>() + 1);
}

TEST_CASE("power-loss protection equals having no cache at all") {
  CheckReport rep = run_check(load("plp-equivalence"), "plp-equivalence");
  REQUIRE(rep.verdict == Verdict::Holds);
  CHECK(rep.details["equivalent"] == true);
  REQUIRE(rep.details["positions"].size() == 5);  // workload steps + 1
  for (const Json& p : rep.details["positions"]) CHECK(p["equal"] == true);
}

TEST_CASE("an irreversible copy step strands the duplicate state") {
  CheckReport rep = run_check(load("mv-crossfs"), "completeness");
  REQUIRE(rep.verdict == Verdict::StructurallyIncomplete);
  CHECK(rep.details["initial"] == "{src-fs/file}");
  CHECK(rep.details["final"] == "{dst-fs/file}");
  REQUIRE(rep.details["stranded"].size() == 1);
  const Json& s = rep.details["stranded"][0];
  CHECK(s["state"] == "{dst-fs/file, src-fs/file}");
  CHECK(s["missing_reverse"] == true);
  CHECK(s["reason"].get<std::string>().find("copy-to-destination") !=
        std::string::npos);
}

TEST_CASE("checker verdicts agree with the definitional oracle") {
  SECTION("volatile ext4 stack") {
    Scenario sc = load("lemma-ext4");
    OracleAnswers o = naive_oracle(sc);
    CHECK(o.trace_pair_exists);
    CHECK(o.clean_witness_exists);
    CHECK_FALSE(o.commit_step_exists);
    CHECK((run_check(sc, "commit-boundary").verdict == Verdict::WitnessFound) ==
          o.trace_pair_exists);
    CHECK((run_check(sc, "clean-not-durable").verdict == Verdict::WitnessFound) ==
          o.clean_witness_exists);
    CHECK((run_check(sc, "no-commit-time").verdict == Verdict::Holds) ==
          o.commit_step_exists);
  }

  SECTION("FUA stack, fault-free bounds") {
    Scenario sc = load("fua-everything");
    OracleAnswers o = naive_oracle(sc);
    CHECK((run_check(sc, "commit-boundary").verdict == Verdict::WitnessFound) ==
          o.trace_pair_exists);
    CHECK((run_check(sc, "clean-not-durable").verdict == Verdict::WitnessFound) ==
          o.clean_witness_exists);
    CHECK((run_check(sc, "no-commit-time").verdict == Verdict::Holds) ==
          o.commit_step_exists);
  }

  SECTION("FUA stack under injected faults") {
    Scenario sc = load("fua-everything");
    sc.max_faults = 2;
    OracleAnswers o = naive_oracle(sc);
    CHECK((run_check(sc, "commit-boundary").verdict == Verdict::WitnessFound) ==
          o.trace_pair_exists);
    CHECK((run_check(sc, "clean-not-durable").verdict == Verdict::WitnessFound) ==
          o.clean_witness_exists);
    CHECK((run_check(sc, "no-commit-time").verdict == Verdict::Holds) ==
          o.commit_step_exists);
  }
}

TEST_CASE("schedule order prefers fewer faults, then lexicographic decisions") {
  auto mk = [](std::vector<std::uint8_t> d) {
    FaultSchedule s;
    s.decisions = std::move(d);
    return s;
  };
  CHECK(detail::schedule_less(mk({}), mk({1})));
  CHECK(detail::schedule_less(mk({0, 0, 1}), mk({0, 1})));
  CHECK(detail::schedule_less(mk({0, 1}), mk({1})));
  CHECK(detail::schedule_less(mk({0, 0, 0, 0, 1}), mk({0, 0, 0, 1})));
  CHECK(detail::schedule_less(mk({1}), mk({1, 1})));  // fault count wins

  FaultSchedule crashed = mk({1});
  crashed.crash = CrashPlan{0, 0, 0, 0};
  CHECK(detail::schedule_less(mk({1}), crashed));
  CHECK_FALSE(detail::schedule_less(crashed, mk({1})));
}

TEST_CASE("checks refuse scenarios missing their preconditions") {
  Scenario volatile_flush = load("flush-noop");
  volatile_flush.device.volatile_cache_present = true;
  volatile_flush.device.volatile_cache_enabled = true;
  CHECK_THROWS_AS(run_check(volatile_flush, "flush-noop"), ConfigError);

  Scenario no_plp = load("plp-equivalence");
  no_plp.device.plp = false;
  CHECK_THROWS_AS(run_check(no_plp, "plp-equivalence"), ConfigError);

  CHECK_THROWS_AS(run_check(load("lemma-ext4"), "write-sync-rename"), ConfigError);
  CHECK_THROWS_AS(run_check(load("lemma-ext4"), "completeness"), ConfigError);
  CHECK_THROWS_AS(run_check(load("lemma-ext4"), "no-such-check"), ConfigError);

  Scenario no_target = load("wsr-full");
  no_target.initial_files.clear();  // the rename target never exists
  CHECK_THROWS_AS(run_check(no_target, "write-sync-rename"), ConfigError);
}

TEST_CASE("verdict strings and finding classification") {
  CHECK(std::string(to_string(Verdict::Holds)) == "holds");
  CHECK(std::string(to_string(Verdict::Violated)) == "violated");
  CHECK(std::string(to_string(Verdict::WitnessFound)) == "witness-found");
  CHECK(std::string(to_string(Verdict::StructurallyIncomplete)) ==
        "structurally-incomplete");
  CHECK_FALSE(verdict_is_finding(Verdict::Holds));
  CHECK(verdict_is_finding(Verdict::Violated));
  CHECK(verdict_is_finding(Verdict::WitnessFound));
  CHECK(verdict_is_finding(Verdict::StructurallyIncomplete));
}

TEST_CASE("every declared check name dispatches") {
  for (const std::string& name : known_checks()) CHECK_FALSE(name.empty());
  CHECK(known_checks().size() == 9);
}
