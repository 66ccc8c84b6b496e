// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "persistcheck/report.hpp"

namespace {

using namespace persistcheck;

constexpr int kExitHolds = 0;
constexpr int kExitFinding = 1;
constexpr int kExitConfig = 2;

struct CommonOpts {
  std::string scenario_path;
  std::string out_dir;
  std::string format = "json";
  std::optional<int> bounds;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_bounds, bool with_seed) {
  cmd->add_option("--scenario", o.scenario_path, "scenario JSON file")->required();
  cmd->add_option("--out", o.out_dir, "directory for report artifacts (default: stdout)");
  cmd->add_option("--format", o.format, "output format (json)");
  if (with_bounds)
    cmd->add_option("--bounds", o.bounds, "override bounds.max_faults");
  if (with_seed) cmd->add_option("--seed", o.seed, "override simulation seed");
}

Scenario load(const CommonOpts& o) {
  if (o.format != "json") throw ConfigError("unsupported format: " + o.format);
  Scenario sc = load_scenario(o.scenario_path);
  if (o.bounds) {
    if (*o.bounds < 0) throw ConfigError("--bounds must be >= 0");
    sc.max_faults = *o.bounds;
  }
  if (o.seed) {
    if (sc.storm) sc.storm->seed = *o.seed;
    if (sc.rseq) sc.rseq->seed = *o.seed;
  }
  return sc;
}

void deliver(const CommonOpts& o, const std::string& filename, const std::string& body) {
  if (o.out_dir.empty()) {
    std::cout << body;
    return;
  }
  std::filesystem::create_directories(o.out_dir);
  std::filesystem::path p = std::filesystem::path(o.out_dir) / filename;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << body;
  std::cout << p.string() << "\n";
}

int cmd_explore(const CommonOpts& o) {
  Scenario sc = load(o);
  ScenarioRuntime rt = to_runtime(sc);
  std::size_t schedules = 0, durable_runs = 0, traces = 0;
  std::set<std::string> trace_set;
  std::size_t recovered_states = 0;
  for_each_schedule(rt, [&](const RunResult& run) {
    ++schedules;
    if (run.durable_at.back()) ++durable_runs;
    trace_set.insert(trace_to_string(run.step_results));
    if (rt.allow_crash)
      for_each_crash(rt, run,
                     [&](const CrashOutcome&, const RecoveredState&) { ++recovered_states; });
  });
  traces = trace_set.size();
  Json j{{"scenario", sc.name},
         {"schedules", schedules},
         {"durable_final_states", durable_runs},
         {"distinct_traces", traces},
         {"max_faults", sc.max_faults},
         {"crash_expansion", rt.allow_crash},
         {"recovered_states", rt.allow_crash ? Json(recovered_states) : Json(nullptr)}};
  deliver(o, sc.name + "-explore.json", render_json(j));
  return kExitHolds;
}

int cmd_check(const CommonOpts& o, const std::string& name) {
  Scenario sc = load(o);
  CheckReport rep = run_check(sc, name);
  deliver(o, sc.name + "-" + name + ".json", render_json(report_to_json(rep)));
  return verdict_is_finding(rep.verdict) ? kExitFinding : kExitHolds;
}

int cmd_witness(const CommonOpts& o, const std::string& name) {
  Scenario sc = load(o);
  CheckReport rep = run_check(sc, name);
  deliver(o, sc.name + "-" + name + "-witness.jsonl", emit_witness_trace(rep));
  return verdict_is_finding(rep.verdict) ? kExitFinding : kExitHolds;
}

int cmd_simulate_retry(const CommonOpts& o) {
  Scenario sc = load(o);
  if (!sc.storm) throw ConfigError("scenario has no storm section");
  StormResult r = simulate_storm(*sc.storm);
  deliver(o, sc.name + "-storm.json", render_json(storm_to_json(*sc.storm, r)));
  return kExitHolds;
}

int cmd_simulate_rseq(const CommonOpts& o) {
  Scenario sc = load(o);
  if (!sc.rseq) throw ConfigError("scenario has no rseq section");
  RseqResult r = simulate_rseq(*sc.rseq);
  deliver(o, sc.name + "-rseq.json", render_json(rseq_to_json(*sc.rseq, r)));
  return kExitHolds;
}

int cmd_report(const CommonOpts& o) {
  Scenario sc = load(o);
  ScenarioReportResult res = scenario_report(sc);
  deliver(o, sc.name + "-report.json", render_json(res.json));
  return res.finding ? kExitFinding : kExitHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "persistcheck: crash-consistency model checking and retry dynamics simulation"};
  app.require_subcommand(1);

  CommonOpts explore_o, check_o, witness_o, retry_o, rseq_o, report_o;
  std::string check_name, witness_name;

  CLI::App* explore = app.add_subcommand("explore", "enumerate fault schedules");
  add_common(explore, explore_o, true, false);

  CLI::App* check = app.add_subcommand("check", "run one check against a scenario");
  check->add_option("name", check_name, "check name")
      ->required()
      ->check(CLI::IsMember(persistcheck::known_checks()));
  add_common(check, check_o, true, false);

  CLI::App* witness = app.add_subcommand("witness", "emit a witness trace (JSONL)");
  witness->add_option("name", witness_name, "check name")
      ->required()
      ->check(CLI::IsMember(persistcheck::known_checks()));
  add_common(witness, witness_o, true, false);

  CLI::App* sretry = app.add_subcommand("simulate-retry", "run the retry storm simulation");
  add_common(sretry, retry_o, false, true);

  CLI::App* srseq =
      app.add_subcommand("simulate-rseq", "run the restartable-sequence simulation");
  add_common(srseq, rseq_o, false, true);

  CLI::App* report = app.add_subcommand("report", "run everything a scenario declares");
  add_common(report, report_o, true, true);

  try {
    app.parse(argc, argv);
    if (explore->parsed()) return cmd_explore(explore_o);
    if (check->parsed()) return cmd_check(check_o, check_name);
    if (witness->parsed()) return cmd_witness(witness_o, witness_name);
    if (sretry->parsed()) return cmd_simulate_retry(retry_o);
    if (srseq->parsed()) return cmd_simulate_rseq(rseq_o);
    if (report->parsed()) return cmd_report(report_o);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const persistcheck::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
