#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <new>
#include <numeric>
#include <random>
#include <sstream>

#include "faascost/profiler/analyze.hpp"
#include "faascost/profiler/probe.hpp"
#include "support/identifiability.hpp"

namespace {
std::atomic<std::uint64_t> g_allocations{0};
}

void* operator new(std::size_t n) {
  ++g_allocations;
  if (void* p = std::malloc(n ? n : 1)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace faascost::profiler {
namespace {

using sched::BandwidthControlConfig;
using sched::Flavor;
using sched::SegmentState;

// Returns a fixed sequence of readings.
struct ScriptedClock {
  std::vector<Micros> readings;
  std::size_t i = 0;
  Micros now_us() { return readings[std::min(i++, readings.size() - 1)]; }
};

sched::ScheduleTimeline pathology(double cpu_ms = 1000.0) {
  return sched::simulate({cpu_ms}, {.period_ms = 20.0, .quota_ms = 1.45, .tick_hz = 250});
}

TEST(ProbeTest, RecordsJumpsAtOrAboveThreshold) {
  ScriptedClock clock{{1000, 1100, 1600, 1700, 2199, 2300, 9000, 12000}};
  EventBuffer buf(16);
  const auto iters = probe({.exec_duration_ms = 10.0, .gap_threshold_us = 500}, clock, buf);
  // Jumps: 1100->1600 (500, counted), 1700->2199 (499, not), 2300->9000, 9000->12000.
  const std::vector<ThrottleEvent> want = {{600, 500}, {8000, 6700}, {11000, 3000}};
  EXPECT_EQ(buf.events(), want);
  EXPECT_EQ(iters, 7u);
  EXPECT_FALSE(buf.truncated());
}

TEST(ProbeTest, FullBufferTruncatesInsteadOfGrowing) {
  ScriptedClock clock{{0, 1000, 2000, 3000, 4000}};
  EventBuffer buf(2);
  probe({.exec_duration_ms = 4.0, .gap_threshold_us = 500}, clock, buf);
  EXPECT_EQ(buf.size(), 2u);
  EXPECT_TRUE(buf.truncated());
  EXPECT_EQ(EventBuffer::capacity_for({.exec_duration_ms = 10.0, .gap_threshold_us = 500}), 21u);
}

TEST(ProbeTest, HotLoopDoesNotAllocate) {
  const auto tl = pathology();
  ReplayClock clock(tl, 2);
  const ProbeConfig cfg{.exec_duration_ms = 2000.0};
  EventBuffer buf(EventBuffer::capacity_for(cfg));
  const auto before = g_allocations.load();
  probe(cfg, clock, buf);
  EXPECT_EQ(g_allocations.load(), before);
  EXPECT_GT(buf.size(), 20u);
}

TEST(ProbeTest, ReplayReproducesTimelineThrottles) {
  const auto tl = pathology();
  const ProbeConfig cfg{.exec_duration_ms = 3000.0};
  const auto events = replay_probe(cfg, tl, 3);
  std::vector<ThrottleEvent> want;
  for (const auto& s : tl.segments)
    if (s.state == SegmentState::throttled && s.start_us < 3'000'000) want.push_back({s.end_us, s.length_us()});
  ASSERT_GT(want.size(), 40u);
  EXPECT_EQ(events, want);
  EXPECT_EQ(events[0], (ThrottleEvent{40000, 36000}));
  EXPECT_EQ(events[1], (ThrottleEvent{100000, 56000}));
}

TEST(ProbeTest, ReplayWorkPerIterationIsConstant) {
  const auto tl = pathology();
  const Micros step = 4;
  ReplayClock clock(tl, step);
  const ProbeConfig cfg{.exec_duration_ms = 2000.0};
  EventBuffer buf(EventBuffer::capacity_for(cfg));
  const auto iterations = probe(cfg, clock, buf);
  EXPECT_EQ(clock.reads(), iterations + 1);  // one clock read per iteration plus the start
  Micros running = 0;
  std::size_t bursts = 0;
  for (const auto& s : tl.segments) {
    if (s.state != SegmentState::running || s.start_us >= 2'000'000) continue;
    running += std::min<Micros>(s.end_us, 2'000'000) - s.start_us;
    ++bursts;
  }
  EXPECT_LE(iterations, static_cast<std::uint64_t>(running / step + 2 * bursts + 2));
}

TEST(ProbeTest, ConfigValidation) {
  EXPECT_THROW(validate(ProbeConfig{.exec_duration_ms = 10.0, .gap_threshold_us = 50}), ProbeError);
  EXPECT_THROW(validate(ProbeConfig{.exec_duration_ms = 0.0}), ProbeError);
  EXPECT_NO_THROW(check_clock_resolution({}));
  EXPECT_GT(MonotonicClock::resolution_ns(), 0);
}

TEST(ProbeTest, UnlimitedHostSeesFewGaps) {
  bool truncated = true;
  const auto events = run_probe({.exec_duration_ms = 300.0}, &truncated);
  EXPECT_FALSE(truncated);
  // Only incidental preemptions are possible here.
  EXPECT_LT(events.size(), 30u);
}

TEST(EventLogTest, RoundTripAndRejectsGarbage) {
  const std::vector<ThrottleEvent> events = {{40000, 36000}, {100000, 56000}};
  std::stringstream ss;
  write_event_log(ss, events);
  EXPECT_EQ(ss.str(), "detected_at_us,gap_us\n40000,36000\n100000,56000\n");
  EXPECT_EQ(read_event_log(ss), events);
  std::istringstream bad_header("at,gap\n1,2\n");
  EXPECT_THROW(read_event_log(bad_header), ProbeError);
  std::istringstream bad_row("detected_at_us,gap_us\n1,x\n");
  EXPECT_THROW(read_event_log(bad_row), ProbeError);
}

TEST(AnalyzeTest, EmptyMeansUnthrottled) {
  const auto fp = analyze({}, 10'000.0);
  EXPECT_EQ(fp.confidence, "unthrottled or unlimited");
  EXPECT_FALSE(fp.period_ms);
  EXPECT_FALSE(fp.tick_hz);
  EXPECT_TRUE(fp.intervals_ms.empty());
  EXPECT_DOUBLE_EQ(fp.duty_cycle, 1.0);
}

TEST(AnalyzeTest, FewEventsGiveDistributionsOnly) {
  const std::vector<ThrottleEvent> events = {{40000, 36000}, {100000, 56000}, {160000, 56000}};
  const auto fp = analyze(events, 200.0);
  EXPECT_EQ(fp.confidence, "insufficient events");
  EXPECT_FALSE(fp.period_ms);
  EXPECT_EQ(fp.intervals_ms, (std::vector<double>{60.0, 60.0}));
  EXPECT_EQ(fp.runtimes_ms, (std::vector<double>{4.0, 4.0}));
  EXPECT_EQ(fp.durations_ms, (std::vector<double>{36.0, 56.0, 56.0}));
}

TEST(AnalyzeTest, RejectsNonIncreasingTimestamps) {
  EXPECT_THROW(analyze({{5000, 1000}, {5000, 1000}}, 10.0), ProbeError);
  EXPECT_THROW(analyze({{5000, 1000}, {5500, 1000}}, 10.0), ProbeError);
  EXPECT_THROW(analyze({{500, 1000}}, 10.0), ProbeError);
}

TEST(AnalyzeTest, IsPure) {
  const auto events = replay_probe({.exec_duration_ms = 2000.0}, pathology());
  EXPECT_EQ(fingerprint_to_json(analyze(events, 2000.0)), fingerprint_to_json(analyze(events, 2000.0)));
}

TEST(AnalyzeTest, RecoversPathologyParameters) {
  const double span = 10'000.0;
  const auto events = replay_probe({.exec_duration_ms = span}, pathology(2000.0), 5);
  const auto fp = analyze(events, span);
  EXPECT_EQ(fp.confidence, "ok");
  ASSERT_TRUE(fp.period_ms);
  EXPECT_NEAR(*fp.period_ms, 20.0, 0.5);
  EXPECT_EQ(fp.tick_hz, 250);
  ASSERT_TRUE(fp.quota_ms);
  EXPECT_GE(*fp.quota_ms, 1.45 - 0.05);
  EXPECT_LE(*fp.quota_ms, 4.0);
  EXPECT_FALSE(fp.notes.empty());
  EXPECT_DOUBLE_EQ(fp.runtimes_ms.front(), 4.0);
}

TEST(AnalyzeTest, PreemptionNoiseFallsBackToRefillPhase) {
  const double span = 3000.0;
  const auto clean = replay_probe({.exec_duration_ms = span}, pathology(), 5);
  // Short preemption gaps inside a fifth of the bursts split their intervals.
  std::mt19937_64 rng(8);
  std::bernoulli_distribution inject(0.2);
  std::vector<ThrottleEvent> noisy;
  std::size_t injected = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (i > 0 && inject(rng)) {
      const Micros burst = clean[i].detected_at_us - clean[i].gap_us - clean[i - 1].detected_at_us;
      if (burst > 1600) {
        std::uniform_int_distribution<Micros> offset(700, burst - 100);
        noisy.push_back({clean[i - 1].detected_at_us + offset(rng), 600});
        ++injected;
      }
    }
    noisy.push_back(clean[i]);
  }
  ASSERT_GT(injected, clean.size() / 10);
  const auto fp = analyze(noisy, span);
  ASSERT_TRUE(fp.period_ms);
  EXPECT_DOUBLE_EQ(*fp.period_ms, 20.0);
  EXPECT_EQ(fp.confidence, "low");
  EXPECT_EQ(fp.interval_mode_ms, analyze(clean, span).interval_mode_ms);
  EXPECT_EQ(analyze(clean, span).confidence, "ok");
}

TEST(AnalyzeTest, RecoversHalfCoreAtThousandHz) {
  const double span = 10'000.0;
  const auto tl = sched::simulate({6000.0}, {.period_ms = 100.0, .quota_ms = 50.0, .tick_hz = 1000});
  const auto fp = analyze(replay_probe({.exec_duration_ms = span}, tl, 5), span);
  ASSERT_TRUE(fp.period_ms);
  EXPECT_DOUBLE_EQ(*fp.period_ms, 100.0);
  EXPECT_NEAR(*fp.quota_ms, 50.0, 1.0);
}

using testing::period_identifiable;
using testing::throttle_intervals;
using testing::tick_identifiable;

TEST(AnalyzeTest, RoundTripRecoversRandomConfigs) {
  std::mt19937_64 rng(2024);
  const double periods[] = {5.0, 10.0, 20.0, 50.0, 100.0};
  const double span = 10'000.0;
  int checked = 0;
  int drawn = 0;
  while (checked < 60 && drawn < 600) {
    ++drawn;
    const double p = periods[std::uniform_int_distribution<int>(0, 4)(rng)];
    const double duty = std::uniform_real_distribution<double>(0.05, 0.9)(rng);
    const int hz = kTickCandidates[std::uniform_int_distribution<int>(0, 3)(rng)];
    BandwidthControlConfig cfg{.period_ms = p, .quota_ms = sched::to_ms(sched::to_micros(p * duty)), .tick_hz = hz};
    const double cpu = duty * span + 2000.0;
    const auto tl = sched::simulate({cpu}, cfg);
    if (!period_identifiable(throttle_intervals(tl, sched::to_micros(span)), sched::to_micros(p)) ||
        !tick_identifiable(cfg, cpu, span))
      continue;
    ++checked;
    const auto fp = analyze(replay_probe({.exec_duration_ms = span}, tl, 5), span);
    ASSERT_TRUE(fp.period_ms) << "P=" << p << " Q=" << cfg.quota_ms << " hz=" << hz;
    EXPECT_DOUBLE_EQ(*fp.period_ms, p) << "Q=" << cfg.quota_ms << " hz=" << hz;
    EXPECT_EQ(fp.tick_hz, hz) << "P=" << p << " Q=" << cfg.quota_ms;
    ASSERT_TRUE(fp.quota_ms);
    EXPECT_LE(std::abs(*fp.quota_ms - cfg.quota_ms), 1000.0 / hz) << "P=" << p << " Q=" << cfg.quota_ms << " hz=" << hz;
  }
  RecordProperty("drawn", drawn);
  EXPECT_GE(checked, 50) << "only " << checked << " identifiable configs in " << drawn << " draws";
}

TEST(ReferenceTest, PublishedRowsMatch) {
  auto fp_with = [](double p, int hz) {
    SchedulerFingerprint fp;
    fp.period_ms = p;
    fp.tick_hz = hz;
    return fp;
  };
  auto matched = [](const SchedulerFingerprint& fp) {
    std::vector<std::string> out;
    for (const auto& m : compare_to_reference(fp))
      if (m.match()) out.push_back(m.row.platform);
    return out;
  };
  EXPECT_EQ(matched(fp_with(20.0, 250)), std::vector<std::string>{"AWS Lambda"});
  EXPECT_EQ(matched(fp_with(10.0, 250)), std::vector<std::string>{"IBM Cloud Code Engine Functions"});
  EXPECT_EQ(matched(fp_with(100.0, 1000)), std::vector<std::string>{"Google Cloud Run Functions"});
  EXPECT_TRUE(matched(fp_with(20.0, 1000)).empty());
  const auto report = fingerprint_report(fp_with(20.0, 250));
  EXPECT_NE(report.find("\"matches\": [\n    \"AWS Lambda\"\n  ]"), std::string::npos) << report;
}

}  // namespace
}  // namespace faascost::profiler
