#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace faascost::sched {

class SchedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simulation time unit.
using Micros = std::int64_t;

Micros to_micros(double ms);
inline double to_ms(Micros us) { return static_cast<double>(us) / 1000.0; }

enum class Flavor { cfs, eevdf };
enum class Accounting {
  lagged,  // runtime charged at ticks (and slice expiry for eevdf) only
  exact,   // runtime charged continuously
};

std::string to_string(Flavor f);
std::string to_string(Accounting a);
Flavor parse_flavor(const std::string& s);
Accounting parse_accounting(const std::string& s);

struct BandwidthControlConfig {
  double period_ms = 20.0;
  double quota_ms = 20.0;
  int tick_hz = 250;
  double slice_ms = 5.0;  // local pool acquisition target
  Flavor flavor = Flavor::cfs;
  Accounting accounting = Accounting::lagged;
  double tick_phase_ms = 0.0;     // offset of the tick train, in [0, tick interval)
  double eevdf_slice_ms = 3.0;    // extra accounting point for eevdf
};

struct TaskSpec {
  double cpu_time_ms = 0.0;
};

enum class SegmentState { running, throttled };

struct Segment {
  Micros start_us = 0;
  Micros end_us = 0;
  SegmentState state = SegmentState::running;

  double start_ms() const { return to_ms(start_us); }
  double end_ms() const { return to_ms(end_us); }
  Micros length_us() const { return end_us - start_us; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct ScheduleTimeline {
  std::vector<Segment> segments;
  Micros completion_us = 0;
  std::vector<Micros> obtained_runtimes_us;  // one per running burst
  std::vector<Micros> throttle_durations_us;
  std::vector<Micros> throttle_debts_us;  // local pool deficit when each throttle began

  double completion_ms() const { return to_ms(completion_us); }
  Micros running_us() const;
  // Largest runtime consumed beyond what had been granted.
  Micros max_overrun_us() const;
};

// Wall-clock duration of a CPU-bound task of T ms under quota Q per period P.
double closed_form_duration(const TaskSpec& task, double period_ms, double quota_ms);
Micros closed_form_duration_us(Micros cpu_us, Micros period_us, Micros quota_us);

void validate(const BandwidthControlConfig& cfg);

ScheduleTimeline simulate(const TaskSpec& task, const BandwidthControlConfig& cfg);

struct CurvePoint {
  double f = 0.0;
  double quota_ms = 0.0;
  double completion_ms = 0.0;
  double ideal_ms = 0.0;
  std::size_t n_throttles = 0;
};

// k/n for k = 1..n.
std::vector<double> fraction_grid(std::size_t n);

// One simulation per fraction with Q = f * P; other settings from `base`.
std::vector<CurvePoint> duration_curve(const TaskSpec& task, double period_ms, const std::vector<double>& fractions,
                                       const BandwidthControlConfig& base = {});
// Same grid evaluated with closed_form_duration.
std::vector<CurvePoint> closed_form_curve(const TaskSpec& task, double period_ms, const std::vector<double>& fractions);

// Largest |completion - ideal| / ideal over the curve.
double max_relative_deviation(const std::vector<CurvePoint>& curve);

struct Breakpoints {
  std::vector<double> f;
  std::optional<std::string> warning;
};

// Grid points where the number of periods spanned by the completion changes.
Breakpoints quantization_breakpoints(const std::vector<CurvePoint>& curve, double period_ms);

// Per-task completion under ideal processor sharing.
double contention_slowdown(std::uint64_t n_tasks, double per_task_cpu_ms, double cores);

std::string timeline_to_json(const ScheduleTimeline& timeline);
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace faascost::sched
