// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "persistcheck/report.hpp"
#include "persistcheck/scenario.hpp"

using namespace persistcheck;

namespace {

StormConfig storm_of(const std::string& name) {
  Scenario sc = load_scenario(std::string(PCK_SCENARIO_DIR) + "/" + name + ".json");
  REQUIRE(sc.storm.has_value());
  return *sc.storm;
}

// A pool nowhere near saturation: no spike, demand at 20% of capacity.
StormConfig calm_config() {
  StormConfig cfg;
  cfg.servers = 10;
  cfg.service_time = 1.0;
  cfg.queue_limit = 50;
  cfg.arrival_rate = 2.0;
  cfg.spike_start = 20.0;
  cfg.spike_duration = 1.0;
  cfg.spike_multiplier = 1.0;
  cfg.timeout = 5.0;
  cfg.max_attempts = 10;
  cfg.horizon = 100.0;
  cfg.recovery_window = 30.0;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("retry policy delays follow the backoff windows") {
  Sampler rng(7);

  RetryPolicy immediate{RetryPolicy::Kind::Immediate, 0.0, 0.0};
  for (int prior = 1; prior <= 6; ++prior) CHECK(immediate.delay(prior, rng) == 0.0);

  RetryPolicy fixed{RetryPolicy::Kind::FixedDelay, 2.5, 100.0};
  for (int prior = 1; prior <= 6; ++prior) CHECK(fixed.delay(prior, rng) == 2.5);

  RetryPolicy expo{RetryPolicy::Kind::Exponential, 1.0, 8.0};
  CHECK(expo.delay(1, rng) == 1.0);
  CHECK(expo.delay(2, rng) == 2.0);
  CHECK(expo.delay(3, rng) == 4.0);
  CHECK(expo.delay(4, rng) == 8.0);
  CHECK(expo.delay(5, rng) == 8.0);  // capped

  RetryPolicy jitter{RetryPolicy::Kind::ExponentialFullJitter, 2.0, 16.0};
  for (int prior = 1; prior <= 6; ++prior) {
    double window = std::min(16.0, 2.0 * std::pow(2.0, prior - 1));
    double d = jitter.delay(prior, rng);
    CHECK(d >= 0.0);
    CHECK(d < window);
  }
  // Same seed, same draws: the jitter is pseudo-random, not random.
  Sampler a(42), b(42);
  for (int prior = 1; prior <= 6; ++prior)
    CHECK(jitter.delay(prior, a) == jitter.delay(prior, b));
}

TEST_CASE("policy kinds round-trip through their names") {
  for (auto k : {RetryPolicy::Kind::Immediate, RetryPolicy::Kind::FixedDelay,
                 RetryPolicy::Kind::Exponential,
                 RetryPolicy::Kind::ExponentialFullJitter})
    CHECK(policy_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(policy_kind_from_string("linear"), ConfigError);
}

TEST_CASE("immediate retries turn a one-second spike into a permanent outage") {
  StormConfig cfg = storm_of("herd-collapse");
  StormResult r = simulate_storm(cfg);

  CHECK(r.capacity == 50.0);
  CHECK(r.demand == 45.0);
  CHECK(r.issued_attempts == 124171);
  CHECK(r.served_in_time == 1698);
  CHECK(r.served_late == 13203);
  CHECK(r.rejected_retried == 97598);
  CHECK(r.rejected_abandoned == 11415);
  CHECK(r.timed_out_retried == 12506);
  CHECK(r.timed_out_abandoned == 705);
  CHECK(r.undecided_at_horizon == 249);
  CHECK(r.peak_queue == 210);  // pinned at the queue limit
  CHECK(r.peak_amplification == Catch::Approx(11.346153846153847));
  CHECK(r.recovery_goodput == 0.0);
  CHECK(r.conservation_ok);

  // Long after the spike the system still serves under 20% of capacity.
  CHECK(r.recovery_goodput < 0.2 * r.capacity);
}

TEST_CASE("full jitter lets the same spike drain back to normal service") {
  StormConfig cfg = storm_of("herd-jitter");
  StormResult r = simulate_storm(cfg);

  CHECK(r.issued_attempts == 14338);
  CHECK(r.served_in_time == 14016);
  CHECK(r.served_late == 75);
  CHECK(r.rejected_retried == 199);
  CHECK(r.rejected_abandoned == 0);
  CHECK(r.timed_out_retried == 75);
  CHECK(r.timed_out_abandoned == 0);
  CHECK(r.undecided_at_horizon == 48);
  CHECK(r.peak_queue == 209);
  CHECK(r.peak_amplification == Catch::Approx(1.1842105263157894));
  CHECK(r.recovery_goodput == Catch::Approx(46.2));
  CHECK(r.conservation_ok);

  // Trailing goodput is back above 90% of organic demand.
  CHECK(r.recovery_goodput >= 0.9 * r.demand);
}

TEST_CASE("the collapse-or-recover split holds across seeds") {
  StormConfig collapse = storm_of("herd-collapse");
  StormConfig jitter = storm_of("herd-jitter");
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    collapse.seed = seed;
    jitter.seed = seed;
    StormResult rc = simulate_storm(collapse);
    StormResult rj = simulate_storm(jitter);
    INFO("seed " << seed);
    CHECK(rc.recovery_goodput < 0.2 * rc.capacity);
    CHECK(rj.recovery_goodput >= 0.9 * rj.demand);
    // Jitter also issues an order of magnitude less retry traffic.
    CHECK(rj.issued_attempts * 5 < rc.issued_attempts);
    CHECK(rc.conservation_ok);
    CHECK(rj.conservation_ok);
  }
}

TEST_CASE("storm accounting balances exactly") {
  for (const char* name : {"herd-collapse", "herd-jitter"}) {
    StormResult r = simulate_storm(storm_of(name));
    INFO(name);
    CHECK(r.issued_attempts ==
          r.served_in_time + r.rejected_retried + r.rejected_abandoned +
              r.timed_out_retried + r.timed_out_abandoned + r.undecided_at_horizon);

    std::uint64_t offered = 0, first = 0, goodput = 0;
    std::uint64_t max_depth = 0;
    for (const StormBucket& b : r.series) {
      offered += b.offered;
      first += b.first_attempts;
      goodput += b.goodput;
      max_depth = std::max(max_depth, b.queue_depth);
    }
    CHECK(offered == r.issued_attempts);
    CHECK(goodput == r.served_in_time);
    CHECK(first <= r.issued_attempts);
    CHECK(max_depth == r.peak_queue);
    CHECK(r.peak_queue <= static_cast<std::uint64_t>(210));
  }
}

TEST_CASE("a calm system shows no amplification at all") {
  StormResult r = simulate_storm(calm_config());
  CHECK(r.rejected_retried == 0);
  CHECK(r.rejected_abandoned == 0);
  CHECK(r.timed_out_retried == 0);
  CHECK(r.timed_out_abandoned == 0);
  CHECK(r.served_late == 0);
  CHECK(r.peak_amplification == 1.0);
  // Everything issued is either answered or still in flight at the horizon.
  CHECK(r.issued_attempts == r.served_in_time + r.undecided_at_horizon);
  CHECK(r.conservation_ok);
}

TEST_CASE("storm runs are reproducible byte for byte") {
  StormConfig cfg = storm_of("herd-jitter");
  Json once = storm_to_json(cfg, simulate_storm(cfg));
  Json twice = storm_to_json(cfg, simulate_storm(cfg));
  CHECK(render_json(once) == render_json(twice));

  StormConfig other = storm_of("herd-collapse");
  other.seed = 2;
  StormResult r2 = simulate_storm(other);
  CHECK(r2.issued_attempts == 124168);  // a different seed, a different run
  CHECK(r2.recovery_goodput == 0.0);    // but the same collapse
}

TEST_CASE("storm configs reject impossible settings") {
  StormConfig ok = calm_config();
  CHECK_NOTHROW(ok.validate());

  StormConfig c = ok;
  c.spike_start = 99.5;
  c.spike_duration = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  c = ok;
  c.queue_limit = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.servers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.service_time = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.timeout = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.max_attempts = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.arrival_rate = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ok;
  c.recovery_window = c.horizon + 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("restart attempts converge to the geometric closed form") {
  RseqConfig cfg;  // p=0.1, steps=5, 100k trials, seed 1
  RseqResult r = simulate_rseq(cfg);

  CHECK(r.trials == 100000);
  CHECK(r.total_attempts == 169027);
  CHECK(r.mean_attempts == Catch::Approx(1.69027));
  CHECK(r.expected == Catch::Approx(1.6935087808430285));
  CHECK(r.max_attempts_seen == 14);
  CHECK(r.relative_error < 0.02);

  // The sample mean of a geometric with success q = (1-p)^L has standard
  // error sqrt((1-q)/q^2 / n); the run must land within three of those.
  double q = std::pow(1.0 - cfg.p, cfg.steps);
  double sigma = std::sqrt((1.0 - q) / (q * q) / static_cast<double>(cfg.trials));
  CHECK(std::abs(r.mean_attempts - r.expected) < 3.0 * sigma);
}

TEST_CASE("restart edge cases behave") {
  RseqConfig never;  // p = 0: every first attempt succeeds
  never.p = 0.0;
  never.trials = 1000;
  RseqResult r0 = simulate_rseq(never);
  CHECK(r0.mean_attempts == 1.0);
  CHECK(r0.max_attempts_seen == 1);
  CHECK(r0.total_attempts == r0.trials);
  CHECK(r0.expected == 1.0);

  RseqConfig coin;  // p = 1/2, one step: expect two attempts
  coin.p = 0.5;
  coin.steps = 1;
  coin.trials = 200000;
  coin.seed = 3;
  RseqResult rc = simulate_rseq(coin);
  CHECK(rc.expected == 2.0);
  CHECK(rc.relative_error < 0.02);

  RseqConfig bad;
  bad.p = 1.0;
  CHECK_THROWS_AS(simulate_rseq(bad), ConfigError);
  bad.p = -0.1;
  CHECK_THROWS_AS(simulate_rseq(bad), ConfigError);
  bad = RseqConfig{};
  bad.steps = 0;
  CHECK_THROWS_AS(simulate_rseq(bad), ConfigError);
  bad = RseqConfig{};
  bad.trials = 0;
  CHECK_THROWS_AS(simulate_rseq(bad), ConfigError);
}

TEST_CASE("rseq reports are deterministic and carry the closed form") {
  RseqConfig cfg;
  Json once = rseq_to_json(cfg, simulate_rseq(cfg));
  Json twice = rseq_to_json(cfg, simulate_rseq(cfg));
  CHECK(render_json(once) == render_json(twice));
  CHECK(once["kind"] == "restartable-sequence");
  CHECK(once["summary"]["expected"].get<double>() ==
        Catch::Approx(1.6935087808430285));
}
