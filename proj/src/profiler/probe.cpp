#include "faascost/profiler/probe.hpp"

#include <sched.h>
#include <time.h>

#include <algorithm>
#include <charconv>
#include <string>

namespace faascost::profiler {

void validate(const ProbeConfig& cfg) {
  if (!(cfg.exec_duration_ms > 0.0)) throw ProbeError("probe duration must be positive");
  if (cfg.gap_threshold_us < 100) throw ProbeError("gap threshold below 100 us is not meaningful");
}

std::size_t EventBuffer::capacity_for(const ProbeConfig& cfg) {
  validate(cfg);
  return static_cast<std::size_t>(sched::to_micros(cfg.exec_duration_ms) / cfg.gap_threshold_us) + 1;
}

Micros MonotonicClock::now_us() const {
  timespec ts;
  clock_gettime(CLOCK_MONOTONIC, &ts);
  return static_cast<Micros>(ts.tv_sec) * 1'000'000 + ts.tv_nsec / 1000;
}

std::int64_t MonotonicClock::resolution_ns() {
  timespec ts;
  if (clock_getres(CLOCK_MONOTONIC, &ts) != 0) throw ProbeError("monotonic clock unavailable");
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

void check_clock_resolution(const ProbeConfig& cfg) {
  const auto res = MonotonicClock::resolution_ns();
  if (res > cfg.gap_threshold_us * 1000)
    throw ProbeError("monotonic clock resolution of " + std::to_string(res) + " ns is coarser than the gap threshold");
}

ReplayClock::ReplayClock(const sched::ScheduleTimeline& timeline, Micros step_us) : step_(step_us) {
  if (step_us <= 0) throw ProbeError("replay step must be positive");
  for (const auto& s : timeline.segments)
    if (s.state == sched::SegmentState::running) running_.push_back(s);
  if (running_.empty()) throw ProbeError("timeline has no running time");
}

Micros ReplayClock::now_us() {
  ++reads_;
  if (!started_) {
    started_ = true;
    t_ = running_.front().start_us;
    return t_;
  }
  if (seg_ < running_.size()) {
    const auto& seg = running_[seg_];
    if (t_ < seg.end_us) {
      t_ = std::min(t_ + step_, seg.end_us);
      return t_;
    }
    ++seg_;
    if (seg_ < running_.size()) {
      t_ = running_[seg_].start_us;
      return t_;
    }
  }
  // Past the task's completion the CPU is uncontended.
  t_ += step_;
  return t_;
}

namespace {

void pin_to_current_cpu() {
  const int cpu = sched_getcpu();
  if (cpu < 0) return;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(cpu, &set);
  sched_setaffinity(0, sizeof set, &set);  // best effort
}

}  // namespace

std::vector<ThrottleEvent> run_probe(const ProbeConfig& cfg, bool* truncated) {
  validate(cfg);
  check_clock_resolution(cfg);
  EventBuffer buffer(EventBuffer::capacity_for(cfg));
  pin_to_current_cpu();
  MonotonicClock clock;
  probe(cfg, clock, buffer);
  if (truncated) *truncated = buffer.truncated();
  return buffer.events();
}

std::vector<ThrottleEvent> replay_probe(const ProbeConfig& cfg, const sched::ScheduleTimeline& timeline,
                                        Micros step_us, bool* truncated) {
  validate(cfg);
  EventBuffer buffer(EventBuffer::capacity_for(cfg));
  ReplayClock clock(timeline, step_us);
  probe(cfg, clock, buffer);
  if (truncated) *truncated = buffer.truncated();
  return buffer.events();
}

void write_event_log(std::ostream& out, const std::vector<ThrottleEvent>& events) {
  out << "detected_at_us,gap_us\n";
  for (const auto& e : events) out << e.detected_at_us << ',' << e.gap_us << '\n';
}

std::vector<ThrottleEvent> read_event_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ProbeError("event log is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "detected_at_us,gap_us") throw ProbeError("event log header must be detected_at_us,gap_us");
  std::vector<ThrottleEvent> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    ThrottleEvent e;
    const char* end = line.data() + line.size();
    bool ok = comma != std::string::npos;
    if (ok) {
      auto r1 = std::from_chars(line.data(), line.data() + comma, e.detected_at_us);
      auto r2 = std::from_chars(line.data() + comma + 1, end, e.gap_us);
      ok = r1.ec == std::errc() && r1.ptr == line.data() + comma && r2.ec == std::errc() && r2.ptr == end;
    }
    if (!ok) throw ProbeError("malformed event log line " + std::to_string(lineno));
    out.push_back(e);
  }
  return out;
}

}  // namespace faascost::profiler
