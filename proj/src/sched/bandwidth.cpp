#include "faascost/sched/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "text.hpp"

namespace faascost::sched {

using nlohmann::json;

Micros to_micros(double ms) {
  if (!std::isfinite(ms)) throw SchedError("time value is not finite");
  return static_cast<Micros>(std::llround(ms * 1000.0));
}

std::string to_string(Flavor f) { return f == Flavor::cfs ? "cfs" : "eevdf"; }
std::string to_string(Accounting a) { return a == Accounting::lagged ? "lagged" : "exact"; }

Flavor parse_flavor(const std::string& s) {
  if (s == "cfs") return Flavor::cfs;
  if (s == "eevdf") return Flavor::eevdf;
  throw SchedError("unknown scheduler flavor: " + s);
}

Accounting parse_accounting(const std::string& s) {
  if (s == "lagged") return Accounting::lagged;
  if (s == "exact") return Accounting::exact;
  throw SchedError("unknown accounting mode: " + s);
}

Micros ScheduleTimeline::running_us() const {
  Micros sum = 0;
  for (const auto& s : segments)
    if (s.state == SegmentState::running) sum += s.length_us();
  return sum;
}

Micros ScheduleTimeline::max_overrun_us() const {
  Micros worst = 0;
  for (Micros d : throttle_debts_us) worst = std::max(worst, d);
  return worst;
}

Micros closed_form_duration_us(Micros cpu_us, Micros period_us, Micros quota_us) {
  if (cpu_us <= 0 || period_us <= 0 || quota_us <= 0) throw SchedError("T, P and Q must be positive");
  if (quota_us > period_us) throw SchedError("quota above one core per period is not modeled");
  const Micros whole = cpu_us / quota_us;
  const Micros rem = cpu_us % quota_us;
  if (rem != 0) return whole * period_us + rem;
  return (whole - 1) * period_us + quota_us;
}

double closed_form_duration(const TaskSpec& task, double period_ms, double quota_ms) {
  return to_ms(closed_form_duration_us(to_micros(task.cpu_time_ms), to_micros(period_ms), to_micros(quota_ms)));
}

void validate(const BandwidthControlConfig& cfg) {
  const Micros p = to_micros(cfg.period_ms);
  const Micros q = to_micros(cfg.quota_ms);
  if (p <= 0) throw SchedError("period must be at least 1 us");
  if (q <= 0) throw SchedError("quota must be at least 1 us");
  if (q > p) throw SchedError("quota above one core per period is not modeled");
  if (cfg.tick_hz <= 0) throw SchedError("tick frequency must be positive");
  if (to_micros(cfg.slice_ms) <= 0) throw SchedError("bandwidth slice must be at least 1 us");
  if (to_micros(cfg.eevdf_slice_ms) <= 0) throw SchedError("eevdf slice must be at least 1 us");
  const Micros phase = to_micros(cfg.tick_phase_ms);
  if (phase < 0 || phase >= 1'000'000 / cfg.tick_hz + (1'000'000 % cfg.tick_hz != 0))
    throw SchedError("tick phase must lie within one tick interval");
}

namespace {

// Ticks fire at phase + floor(k * 1e6 / hz) us, k >= 0.
class TickTrain {
 public:
  TickTrain(int hz, Micros phase) : hz_(hz), phase_(phase) {}

  Micros next_after(Micros t) const {
    const __int128 m = static_cast<__int128>(t) - phase_ + 1;
    if (m <= 0) return phase_;
    const __int128 k = (m * hz_ + 999'999) / 1'000'000;
    return phase_ + static_cast<Micros>(k * 1'000'000 / hz_);
  }

 private:
  __int128 hz_;
  Micros phase_;
};

}  // namespace

ScheduleTimeline simulate(const TaskSpec& task, const BandwidthControlConfig& cfg) {
  validate(cfg);
  const Micros total = to_micros(task.cpu_time_ms);
  if (total <= 0) throw SchedError("cpu time must be at least 1 us");
  const Micros period = to_micros(cfg.period_ms);
  const Micros quota = to_micros(cfg.quota_ms);
  const Micros slice = to_micros(cfg.slice_ms);
  const Micros eevdf_slice = to_micros(cfg.eevdf_slice_ms);
  const bool exact = cfg.accounting == Accounting::exact;
  const bool eevdf = cfg.flavor == Flavor::eevdf;
  const TickTrain ticks(cfg.tick_hz, to_micros(cfg.tick_phase_ms));

  ScheduleTimeline out;
  Micros t = 0;
  Micros global = quota;  // refilled at t = 0
  Micros local = 0;
  Micros done = 0;
  Micros accounted_at = 0;
  Micros next_refill = period;
  Micros seg_start = 0;
  Micros picked_at = 0;  // start of the current burst

  // Top the local pool up to one slice from whatever the global pool holds.
  auto acquire = [&] {
    const Micros amount = std::min(global, slice - local);
    if (amount > 0) {
      global -= amount;
      local += amount;
    }
    return local > 0;
  };
  auto close = [&](SegmentState state) {
    out.segments.push_back({seg_start, t, state});
    (state == SegmentState::running ? out.obtained_runtimes_us : out.throttle_durations_us).push_back(t - seg_start);
    seg_start = t;
  };

  bool running = acquire();
  while (true) {
    if (!running) {
      t = next_refill;
      next_refill += period;
      global = quota;
      const Micros amount = std::min(global, 1 - local);
      global -= amount;
      local += amount;
      if (local > 0) {
        close(SegmentState::throttled);
        running = true;
        accounted_at = t;
        picked_at = t;
      }
      continue;
    }

    enum class Event { completion, refill, account } kind = Event::completion;
    Micros next = t + (total - done);
    if (next_refill < next) {
      next = next_refill;
      kind = Event::refill;
    }
    Micros account = exact ? accounted_at + local : ticks.next_after(accounted_at);
    if (!exact && eevdf) {
      // Request slices run back to back from the moment the task was picked.
      const Micros expiry = picked_at + ((accounted_at - picked_at) / eevdf_slice + 1) * eevdf_slice;
      account = std::min(account, expiry);
    }
    if (account < next) {
      next = account;
      kind = Event::account;
    }

    done += next - t;
    t = next;
    if (kind == Event::completion) {
      close(SegmentState::running);
      out.completion_us = t;
      return out;
    }
    if (kind == Event::refill) {
      global = quota;
      next_refill += period;
      continue;
    }
    local -= t - accounted_at;
    accounted_at = t;
    if (local <= 0 && !acquire()) {
      out.throttle_debts_us.push_back(-local);
      close(SegmentState::running);
      running = false;
    }
  }
}

std::vector<double> fraction_grid(std::size_t n) {
  if (n == 0) throw SchedError("fraction grid needs at least one point");
  std::vector<double> out(n);
  for (std::size_t k = 1; k <= n; ++k) out[k - 1] = static_cast<double>(k) / static_cast<double>(n);
  return out;
}

namespace {

void check_fraction(double f) {
  if (!(f > 0.0 && f <= 1.0)) throw SchedError("vCPU fraction must lie in (0, 1]");
}

}  // namespace

std::vector<CurvePoint> duration_curve(const TaskSpec& task, double period_ms, const std::vector<double>& fractions,
                                       const BandwidthControlConfig& base) {
  std::vector<CurvePoint> out;
  out.reserve(fractions.size());
  for (double f : fractions) {
    check_fraction(f);
    auto cfg = base;
    cfg.period_ms = period_ms;
    cfg.quota_ms = to_ms(to_micros(f * period_ms));
    const auto tl = simulate(task, cfg);
    out.push_back({f, cfg.quota_ms, tl.completion_ms(), task.cpu_time_ms / f, tl.throttle_durations_us.size()});
  }
  return out;
}

std::vector<CurvePoint> closed_form_curve(const TaskSpec& task, double period_ms, const std::vector<double>& fractions) {
  std::vector<CurvePoint> out;
  out.reserve(fractions.size());
  const Micros cpu = to_micros(task.cpu_time_ms);
  const Micros period = to_micros(period_ms);
  for (double f : fractions) {
    check_fraction(f);
    const Micros quota = to_micros(f * period_ms);
    const Micros d = closed_form_duration_us(cpu, period, quota);
    const std::size_t throttles = quota == period ? 0 : static_cast<std::size_t>((cpu - 1) / quota);
    out.push_back({f, to_ms(quota), to_ms(d), task.cpu_time_ms / f, throttles});
  }
  return out;
}

double max_relative_deviation(const std::vector<CurvePoint>& curve) {
  double worst = 0.0;
  for (const auto& p : curve) worst = std::max(worst, std::abs(p.completion_ms - p.ideal_ms) / p.ideal_ms);
  return worst;
}

Breakpoints quantization_breakpoints(const std::vector<CurvePoint>& curve, double period_ms) {
  Breakpoints out;
  const Micros period = to_micros(period_ms);
  if (period <= 0) throw SchedError("period must be positive");
  if (curve.size() < 50) out.warning = "grid has fewer than 50 points; breakpoints may be missed";
  auto periods = [&](const CurvePoint& p) { return (to_micros(p.completion_ms) + period - 1) / period; };
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (!(curve[i].f > curve[i - 1].f)) throw SchedError("curve must be sorted by ascending fraction");
    if (periods(curve[i]) != periods(curve[i - 1])) out.f.push_back(curve[i].f);
  }
  return out;
}

double contention_slowdown(std::uint64_t n_tasks, double per_task_cpu_ms, double cores) {
  if (n_tasks == 0) throw SchedError("need at least one task");
  if (!(per_task_cpu_ms > 0.0) || !(cores > 0.0)) throw SchedError("cpu time and cores must be positive");
  return std::max(1.0, static_cast<double>(n_tasks) / cores) * per_task_cpu_ms;
}

std::string timeline_to_json(const ScheduleTimeline& timeline) {
  json segs = json::array();
  for (const auto& s : timeline.segments)
    segs.push_back({{"start_ms", s.start_ms()},
                    {"end_ms", s.end_ms()},
                    {"state", s.state == SegmentState::running ? "running" : "throttled"}});
  json runs = json::array();
  for (Micros r : timeline.obtained_runtimes_us) runs.push_back(to_ms(r));
  json throttles = json::array();
  for (Micros d : timeline.throttle_durations_us) throttles.push_back(to_ms(d));
  const json doc = {{"completion_ms", timeline.completion_ms()},
                    {"segments", segs},
                    {"obtained_runtimes_ms", runs},
                    {"throttle_durations_ms", throttles}};
  return doc.dump(2) + "\n";
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "f,quota_ms,completion_ms,ideal_ms,n_throttles\n";
  for (const auto& p : curve)
    out << detail::shortest(p.f) << ',' << detail::shortest(p.quota_ms) << ',' << detail::shortest(p.completion_ms)
        << ',' << detail::shortest(p.ideal_ms) << ',' << p.n_throttles << '\n';
}

}  // namespace faascost::sched
