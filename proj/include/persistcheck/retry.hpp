// Copyright (c) 2026, the persistcheck authors.
// Licensed under the Apache 2.0 license found in the LICENSE file or at:
//     https://opensource.org/licenses/Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "persistcheck/types.hpp"

namespace persistcheck {

// ---------------------------------------------------------------------------
// Deterministic sampling
//
// Sampling is hand-rolled on top of mt19937_64 because the standard
// distributions are implementation-defined: the same seed must reproduce the
// same run byte for byte everywhere.

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform01() {
    // 53 random bits -> [0, 1) with full double precision.
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double exponential(double mean) {
    double u = uniform01();
    // Avoid log(0); the largest representable u is already < 1.
    if (u <= 0.0) u = 0x1.0p-53;
    return -std::log(u) * mean;
  }

 private:
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Retry policies

struct RetryPolicy {
  enum class Kind { Immediate, FixedDelay, Exponential, ExponentialFullJitter };
  Kind kind = Kind::Immediate;
  double base = 1.0;
  double cap = 1e9;

  // Delay before attempt (prior_attempts + 1), given prior_attempts >= 1.
  double delay(int prior_attempts, Sampler& rng) const {
    double window = std::min(cap, base * std::pow(2.0, prior_attempts - 1));
    switch (kind) {
      case Kind::Immediate: return 0.0;
      case Kind::FixedDelay: return base;
      case Kind::Exponential: return window;
      case Kind::ExponentialFullJitter: return rng.uniform(0.0, window);
    }
    return 0.0;
  }
};

inline const char* to_string(RetryPolicy::Kind k) {
  switch (k) {
    case RetryPolicy::Kind::Immediate: return "immediate";
    case RetryPolicy::Kind::FixedDelay: return "fixed-delay";
    case RetryPolicy::Kind::Exponential: return "exponential";
    case RetryPolicy::Kind::ExponentialFullJitter: return "exponential-full-jitter";
  }
  return "?";
}

inline RetryPolicy::Kind policy_kind_from_string(const std::string& s) {
  if (s == "immediate") return RetryPolicy::Kind::Immediate;
  if (s == "fixed-delay") return RetryPolicy::Kind::FixedDelay;
  if (s == "exponential") return RetryPolicy::Kind::Exponential;
  if (s == "exponential-full-jitter") return RetryPolicy::Kind::ExponentialFullJitter;
  throw ConfigError("unknown retry policy: " + s);
}

// ---------------------------------------------------------------------------
// Retry storm simulation
//
// A fixed-size server pool with a bounded FIFO queue serves requests that
// take service_time each. An attempt that finds the queue full is rejected
// on the spot and (policy permitting) retried. An attempt that gets in but
// is not answered within `timeout` is not recalled: it stays in the queue
// and eventually consumes a server for nothing. That wasted service is what
// lets a burst outlive its cause, and the queue bound is what makes recovery
// possible at all: without it the backlog grows without limit and no retry
// policy can drain it. Organic demand arrives as a Poisson process whose
// rate is multiplied during a spike window.

struct StormConfig {
  int servers = 50;
  double service_time = 1.0;
  int queue_limit = 300;       // waiting attempts beyond the busy servers
  double arrival_rate = 45.0;  // organic first attempts per time unit
  double spike_start = 20.0;
  double spike_duration = 1.0;
  double spike_multiplier = 10.0;
  double timeout = 3.0;
  int max_attempts = 10;  // total attempts per request, first one included
  RetryPolicy policy;
  double horizon = 300.0;
  double bucket = 1.0;
  double recovery_window = 30.0;  // trailing window for the recovery metric
  std::uint64_t seed = 1;

  void validate() const {
    if (servers <= 0 || service_time <= 0 || queue_limit <= 0 ||
        arrival_rate < 0 || timeout <= 0 || max_attempts < 1 || horizon <= 0 ||
        bucket <= 0 || recovery_window <= 0 || recovery_window > horizon)
      throw ConfigError("storm config out of range");
    if (spike_start + spike_duration > horizon)
      throw ConfigError("spike window extends past the horizon");
  }

  double capacity() const { return servers / service_time; }
};

struct StormBucket {
  double t_start = 0;
  std::uint64_t offered = 0;         // attempts issued in this bucket
  std::uint64_t first_attempts = 0;  // organic arrivals in this bucket
  std::uint64_t goodput = 0;         // attempts served within their deadline
  std::uint64_t queue_depth = 0;     // waiting attempts at bucket end
  double amplification = 1.0;        // offered / max(first_attempts, 1)
};

struct StormResult {
  std::vector<StormBucket> series;
  std::uint64_t issued_attempts = 0;
  std::uint64_t served_in_time = 0;
  std::uint64_t served_late = 0;  // zombie completions, service wasted
  std::uint64_t rejected_retried = 0;    // queue full, another attempt coming
  std::uint64_t rejected_abandoned = 0;  // queue full, retry budget exhausted
  std::uint64_t timed_out_retried = 0;
  std::uint64_t timed_out_abandoned = 0;
  std::uint64_t undecided_at_horizon = 0;  // issued, outcome still open at the end
  std::uint64_t peak_queue = 0;
  double peak_amplification = 1.0;
  double recovery_goodput = 0.0;  // served-in-time rate over the trailing window
  double capacity = 0.0;
  double demand = 0.0;  // organic arrival rate
  bool conservation_ok = false;
};

namespace detail {

enum class StormEventKind { Attempt, Completion, Timeout };

struct StormEvent {
  double time = 0;
  std::uint64_t seq = 0;  // tie-break: earlier scheduling wins
  StormEventKind kind = StormEventKind::Attempt;
  std::uint64_t id = 0;    // attempt id (Completion, Timeout)
  int attempt_no = 1;      // attempt number within its request (Attempt)
  bool operator>(const StormEvent& o) const {
    if (time != o.time) return time > o.time;
    return seq > o.seq;
  }
};

struct AttemptState {
  double issued = 0;
  double deadline = 0;
  int attempt_no = 1;  // 1-based within its request
  bool served_in_time = false;
  bool completed = false;
  bool timeout_processed = false;
};

}  // namespace detail

/**
 * Run the storm simulation. Deterministic for a given config: one RNG drives
 * both the arrival process and the jitter, and simultaneous events order by
 * scheduling sequence.
 */
inline StormResult simulate_storm(const StormConfig& cfg) {
  cfg.validate();
  StormResult res;
  res.capacity = cfg.capacity();
  res.demand = cfg.arrival_rate;

  Sampler rng(cfg.seed);
  std::priority_queue<detail::StormEvent, std::vector<detail::StormEvent>,
                      std::greater<detail::StormEvent>>
      events;
  std::uint64_t seq = 0;
  auto push = [&](double t, detail::StormEventKind k, std::uint64_t id, int attempt_no = 1) {
    events.push(detail::StormEvent{t, seq++, k, id, attempt_no});
  };

  std::vector<detail::AttemptState> attempts;
  std::deque<std::uint64_t> queue;  // waiting attempt ids
  int busy = 0;

  const std::size_t nbuckets = static_cast<std::size_t>(cfg.horizon / cfg.bucket) + 1;
  res.series.resize(nbuckets);
  for (std::size_t b = 0; b < nbuckets; ++b) res.series[b].t_start = b * cfg.bucket;
  auto bucket_at = [&](double t) -> StormBucket& {
    std::size_t b = static_cast<std::size_t>(t / cfg.bucket);
    if (b >= nbuckets) b = nbuckets - 1;
    return res.series[b];
  };

  auto rate_at = [&](double t) {
    bool in_spike = t >= cfg.spike_start && t < cfg.spike_start + cfg.spike_duration;
    return cfg.arrival_rate * (in_spike ? cfg.spike_multiplier : 1.0);
  };

  // Piecewise-constant Poisson arrivals: draw within the current rate
  // segment, clamp at segment boundaries and redraw.
  double next_arrival = 0;
  {
    double t = 0;
    while (true) {
      double r = rate_at(t);
      double boundary = t < cfg.spike_start ? cfg.spike_start
                        : t < cfg.spike_start + cfg.spike_duration
                            ? cfg.spike_start + cfg.spike_duration
                            : cfg.horizon + 1;
      double dt = r > 0 ? rng.exponential(1.0 / r) : boundary - t + 1;
      if (t + dt <= boundary) {
        next_arrival = t + dt;
        break;
      }
      t = boundary;
      if (t > cfg.horizon) {
        next_arrival = t;
        break;
      }
    }
  }

  auto issue_attempt = [&](double t, int attempt_no, bool organic) {
    ++res.issued_attempts;
    StormBucket& b = bucket_at(t);
    ++b.offered;
    if (organic) ++b.first_attempts;
    // Full queue: shed the attempt right here. It never holds a slot or a
    // server, so its only echo is the retry it may schedule.
    if (busy >= cfg.servers &&
        queue.size() >= static_cast<std::size_t>(cfg.queue_limit)) {
      if (attempt_no < cfg.max_attempts) {
        ++res.rejected_retried;
        double delay = cfg.policy.delay(attempt_no, rng);
        push(t + delay, detail::StormEventKind::Attempt, 0, attempt_no + 1);
      } else {
        ++res.rejected_abandoned;
      }
      return;
    }
    std::uint64_t id = attempts.size();
    attempts.push_back(detail::AttemptState{t, t + cfg.timeout, attempt_no, false,
                                            false, false});
    push(t + cfg.timeout, detail::StormEventKind::Timeout, id);
    if (busy < cfg.servers) {
      ++busy;
      push(t + cfg.service_time, detail::StormEventKind::Completion, id);
    } else {
      queue.push_back(id);
    }
  };

  auto schedule_next_organic = [&](double now) {
    double t = now;
    while (true) {
      double r = rate_at(t);
      double boundary = t < cfg.spike_start ? cfg.spike_start
                        : t < cfg.spike_start + cfg.spike_duration
                            ? cfg.spike_start + cfg.spike_duration
                            : cfg.horizon + 1;
      double dt = r > 0 ? rng.exponential(1.0 / r) : boundary - t + 1;
      if (t + dt <= boundary) return t + dt;
      t = boundary;
      if (t > cfg.horizon) return t;
    }
  };

  double now = 0;
  std::size_t sample_bucket = 0;
  auto sample_queues_until = [&](double t) {
    while (sample_bucket + 1 < nbuckets &&
           res.series[sample_bucket + 1].t_start <= t) {
      res.series[sample_bucket].queue_depth = queue.size();
      ++sample_bucket;
    }
  };

  while (true) {
    double event_time = events.empty() ? cfg.horizon + 1 : events.top().time;
    if (next_arrival <= event_time && next_arrival <= cfg.horizon) {
      now = next_arrival;
      sample_queues_until(now);
      issue_attempt(now, 1, true);
      next_arrival = schedule_next_organic(now);
      continue;
    }
    if (events.empty() || events.top().time > cfg.horizon) break;
    detail::StormEvent ev = events.top();
    events.pop();
    now = ev.time;
    sample_queues_until(now);
    switch (ev.kind) {
      case detail::StormEventKind::Attempt:
        issue_attempt(now, ev.attempt_no, false);
        break;
      case detail::StormEventKind::Completion: {
        detail::AttemptState& a = attempts[ev.id];
        a.completed = true;
        if (now <= a.deadline) {
          a.served_in_time = true;
          ++res.served_in_time;
          ++bucket_at(now).goodput;
        } else {
          ++res.served_late;
        }
        --busy;
        if (!queue.empty()) {
          std::uint64_t nxt = queue.front();
          queue.pop_front();
          ++busy;
          push(now + cfg.service_time, detail::StormEventKind::Completion, nxt);
        }
        break;
      }
      case detail::StormEventKind::Timeout: {
        detail::AttemptState& a = attempts[ev.id];
        a.timeout_processed = true;
        if (a.served_in_time) break;  // answered in time, timer is moot
        if (a.attempt_no < cfg.max_attempts) {
          ++res.timed_out_retried;
          double delay = cfg.policy.delay(a.attempt_no, rng);
          push(now + delay, detail::StormEventKind::Attempt, 0, a.attempt_no + 1);
        } else {
          ++res.timed_out_abandoned;
        }
        break;
      }
    }
  }
  sample_queues_until(cfg.horizon);
  res.series[sample_bucket].queue_depth = queue.size();

  for (const auto& a : attempts)
    if (!a.served_in_time && !a.timeout_processed) ++res.undecided_at_horizon;

  for (auto& b : res.series) {
    double denom = b.first_attempts > 0 ? static_cast<double>(b.first_attempts) : 1.0;
    b.amplification = static_cast<double>(b.offered) / denom;
    res.peak_amplification = std::max(res.peak_amplification, b.amplification);
    res.peak_queue = std::max(res.peak_queue, b.queue_depth);
  }

  std::uint64_t recovered = 0;
  for (const auto& b : res.series)
    if (b.t_start >= cfg.horizon - cfg.recovery_window) recovered += b.goodput;
  res.recovery_goodput = static_cast<double>(recovered) / cfg.recovery_window;

  res.conservation_ok =
      res.issued_attempts == res.served_in_time + res.rejected_retried +
                                 res.rejected_abandoned + res.timed_out_retried +
                                 res.timed_out_abandoned + res.undecided_at_horizon;
  return res;
}

// ---------------------------------------------------------------------------
// Restartable sequences
//
// A sequence of L steps restarts from scratch whenever a step is interrupted
// (probability p, independent per step). The attempt count until a clean
// pass is geometric with success probability (1-p)^L, so the expected number
// of attempts is (1-p)^(-L); the simulation converges to that closed form.

struct RseqConfig {
  double p = 0.1;
  int steps = 5;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;

  void validate() const {
    if (p < 0 || p >= 1 || steps < 1 || trials < 1)
      throw ConfigError("rseq config out of range: need 0 <= p < 1, steps >= 1");
  }
};

struct RseqResult {
  double mean_attempts = 0;
  double expected = 0;  // (1-p)^(-L)
  double relative_error = 0;
  std::uint64_t trials = 0;
  std::uint64_t total_attempts = 0;
  std::uint64_t max_attempts_seen = 0;
};

inline RseqResult simulate_rseq(const RseqConfig& cfg) {
  cfg.validate();
  Sampler rng(cfg.seed);
  RseqResult res;
  res.trials = cfg.trials;
  for (std::uint64_t t = 0; t < cfg.trials; ++t) {
    std::uint64_t attempts = 0;
    bool done = false;
    while (!done) {
      ++attempts;
      done = true;
      for (int s = 0; s < cfg.steps; ++s) {
        if (cfg.p > 0 && rng.uniform01() < cfg.p) {
          done = false;  // interrupted: restart the whole sequence
          break;
        }
      }
    }
    res.total_attempts += attempts;
    res.max_attempts_seen = std::max(res.max_attempts_seen, attempts);
  }
  res.mean_attempts = static_cast<double>(res.total_attempts) / cfg.trials;
  res.expected = std::pow(1.0 - cfg.p, -cfg.steps);
  res.relative_error = std::abs(res.mean_attempts - res.expected) / res.expected;
  return res;
}

}  // namespace persistcheck
