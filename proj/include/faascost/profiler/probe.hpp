#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "faascost/sched/bandwidth.hpp"

namespace faascost::profiler {

using sched::Micros;

class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbeConfig {
  double exec_duration_ms = 10'000.0;
  Micros gap_threshold_us = 500;
};

void validate(const ProbeConfig& cfg);

// One jump in the monotonic clock. Both fields in microseconds; detected_at is relative to probe start.
struct ThrottleEvent {
  Micros detected_at_us = 0;
  Micros gap_us = 0;
  friend bool operator==(const ThrottleEvent&, const ThrottleEvent&) = default;
};

// Fixed-size storage filled by the probe loop. Never grows.
class EventBuffer {
 public:
  explicit EventBuffer(std::size_t capacity) : events_(capacity) {}
  // Worst case for a config: one event per threshold-long gap.
  static std::size_t capacity_for(const ProbeConfig& cfg);

  void clear() {
    size_ = 0;
    truncated_ = false;
  }
  void push(const ThrottleEvent& e) {
    if (size_ < events_.size()) {
      events_[size_++] = e;
    } else {
      truncated_ = true;
    }
  }
  std::size_t size() const { return size_; }
  bool truncated() const { return truncated_; }
  std::vector<ThrottleEvent> events() const { return {events_.begin(), events_.begin() + size_}; }

 private:
  std::vector<ThrottleEvent> events_;
  std::size_t size_ = 0;
  bool truncated_ = false;
};

// Busy-loops for the configured duration, recording every clock jump at or above the
// threshold. `clock.now_us()` must be monotonic. No allocation happens inside.
template <class Clock>
std::uint64_t probe(const ProbeConfig& cfg, Clock& clock, EventBuffer& out) {
  const Micros duration = sched::to_micros(cfg.exec_duration_ms);
  const Micros threshold = cfg.gap_threshold_us;
  out.clear();
  std::uint64_t iterations = 0;
  const Micros start = clock.now_us();
  Micros last = start;
  while (true) {
    const Micros now = clock.now_us();
    ++iterations;
    if (now - last >= threshold) out.push({now - start, now - last});
    last = now;
    if (now - start >= duration) return iterations;
  }
}

// CLOCK_MONOTONIC in microseconds.
class MonotonicClock {
 public:
  Micros now_us() const;
  // Clock resolution in nanoseconds.
  static std::int64_t resolution_ns();
};

// Fails when the clock cannot resolve gaps as small as the threshold.
void check_clock_resolution(const ProbeConfig& cfg);

// Virtual clock driven by a simulated timeline. Each read costs `step_us` of CPU; reads land on
// every running segment's end, and the next read lands on the following segment's start.
class ReplayClock {
 public:
  explicit ReplayClock(const sched::ScheduleTimeline& timeline, Micros step_us = 1);
  Micros now_us();
  std::uint64_t reads() const { return reads_; }

 private:
  std::vector<sched::Segment> running_;
  std::size_t seg_ = 0;
  Micros t_ = 0;
  Micros step_;
  bool started_ = false;
  std::uint64_t reads_ = 0;
};

std::vector<ThrottleEvent> run_probe(const ProbeConfig& cfg, bool* truncated = nullptr);
std::vector<ThrottleEvent> replay_probe(const ProbeConfig& cfg, const sched::ScheduleTimeline& timeline,
                                        Micros step_us = 1, bool* truncated = nullptr);

// CSV with header `detected_at_us,gap_us`.
void write_event_log(std::ostream& out, const std::vector<ThrottleEvent>& events);
std::vector<ThrottleEvent> read_event_log(std::istream& in);

}  // namespace faascost::profiler
