#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "faascost/profiler/probe.hpp"

namespace faascost::profiler {

struct HistogramBin {
  double center_ms = 0.0;
  std::size_t count = 0;
};

// Bins centered on multiples of `bin_ms`; empty bins omitted.
std::vector<HistogramBin> histogram(const std::vector<double>& values_ms, double bin_ms);

struct SchedulerFingerprint {
  std::optional<double> period_ms;
  std::optional<double> quota_ms;
  std::optional<int> tick_hz;
  std::string confidence;
  std::vector<std::string> notes;

  std::size_t events = 0;
  double span_ms = 0.0;
  double duty_cycle = 0.0;        // running time / span
  double sub_2ms_fraction = 0.0;  // share of throttle durations below 2 ms
  std::optional<double> interval_mode_ms;
  std::vector<double> intervals_ms;  // between successive detections
  std::vector<double> durations_ms;  // gap lengths
  std::vector<double> runtimes_ms;   // CPU obtained before each throttle
};

inline constexpr std::size_t kMinEventsForEstimates = 20;
inline constexpr double kHistogramBinMs = 0.5;
inline constexpr int kTickCandidates[] = {100, 250, 300, 1000};

// Infers bandwidth-control period, quota and tick rate from a throttle event stream.
// `span_ms` is the probe's total duration.
SchedulerFingerprint analyze(const std::vector<ThrottleEvent>& events, double span_ms);

struct ReferenceRow {
  std::string platform;
  double period_ms = 0.0;
  int tick_hz = 0;
};

// Published per-provider scheduling parameters.
const std::vector<ReferenceRow>& reference_table();

struct ReferenceMatch {
  ReferenceRow row;
  bool period_match = false;
  bool tick_match = false;
  bool match() const { return period_match && tick_match; }
};

std::vector<ReferenceMatch> compare_to_reference(const SchedulerFingerprint& fp,
                                                 const std::vector<ReferenceRow>& table = reference_table());

std::string fingerprint_to_json(const SchedulerFingerprint& fp);
// Fingerprint beside the reference table, with per-row match flags.
std::string fingerprint_report(const SchedulerFingerprint& fp,
                               const std::vector<ReferenceRow>& table = reference_table());

}  // namespace faascost::profiler
