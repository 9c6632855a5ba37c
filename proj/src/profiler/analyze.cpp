#include "faascost/profiler/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace faascost::profiler {

using nlohmann::json;

std::vector<HistogramBin> histogram(const std::vector<double>& values_ms, double bin_ms) {
  if (!(bin_ms > 0.0)) throw ProbeError("histogram bin width must be positive");
  std::map<long long, std::size_t> counts;
  for (double v : values_ms) ++counts[std::llround(v / bin_ms)];
  std::vector<HistogramBin> out;
  out.reserve(counts.size());
  for (const auto& [k, n] : counts) out.push_back({static_cast<double>(k) * bin_ms, n});
  return out;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Share of values lying within `tol` of a positive multiple of `unit`.
double multiple_share(const std::vector<double>& values, double unit, double tol) {
  std::size_t hits = 0;
  for (double x : values) {
    const double m = std::round(x / unit);
    if (m >= 1.0 && std::abs(x - m * unit) <= tol) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(values.size());
}

constexpr double kConsistentShare = 0.9;
constexpr double kTickToleranceMs = 0.1;
constexpr double kDivisorGain = 0.02;

// Largest period on the histogram grid of which nearly all intervals are multiples. Missed
// throttles only add multiples, so a divisor is preferred once it explains a further
// kDivisorGain of the intervals.
std::optional<double> estimate_period(const std::vector<double>& intervals) {
  auto share = [&](double p) { return multiple_share(intervals, p, std::min(kHistogramBinMs / 2.0, p / 10.0)); };
  const double longest = *std::max_element(intervals.begin(), intervals.end());
  std::optional<double> best;
  for (long long k = std::llround(std::floor(longest / kHistogramBinMs)); k >= 2 && !best; --k) {
    const double p = static_cast<double>(k) * kHistogramBinMs;
    if (share(p) >= kConsistentShare) best = p;
  }
  if (!best) return best;
  for (bool refined = true; refined;) {
    refined = false;
    const long long cur = std::llround(*best / kHistogramBinMs);
    for (long long div = 2; cur / div >= 2; ++div) {
      if (cur % div != 0) continue;
      const double d = static_cast<double>(cur / div) * kHistogramBinMs;
      if (share(d) - share(*best) >= kDivisorGain) {
        best = d;
        refined = true;
        break;
      }
    }
  }
  return best;
}

constexpr double kPhaseShare = 0.75;

// Largest share of detections whose offset modulo `period` lies in one window of width 2 * tol.
double phase_share(const std::vector<Micros>& detections, Micros period, Micros tol) {
  std::vector<Micros> res;
  res.reserve(detections.size());
  for (Micros d : detections) res.push_back(d % period);
  std::sort(res.begin(), res.end());
  const std::size_t n = res.size();
  std::size_t best = 0;
  for (std::size_t i = 0, j = 0; i < n; ++i) {
    auto at = [&](std::size_t k) { return k < n ? res[k] : res[k - n] + period; };
    if (j < i) j = i;
    while (j < i + n && at(j) - res[i] <= 2 * tol) ++j;
    best = std::max(best, j - i);
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

// Throttles end on refills, so genuine detections share one phase modulo the period while
// preemption noise does not. Used when noise splits intervals too often for estimate_period.
std::optional<double> estimate_period_by_phase(const std::vector<ThrottleEvent>& events, double longest_ms,
                                               double& share) {
  std::vector<Micros> detections;
  for (const auto& e : events) detections.push_back(e.detected_at_us);
  for (long long k = std::llround(std::floor(longest_ms / kHistogramBinMs)); k >= 2; --k) {
    const double p = static_cast<double>(k) * kHistogramBinMs;
    const Micros tol = sched::to_micros(std::min(kHistogramBinMs / 2.0, p / 10.0));
    share = phase_share(detections, sched::to_micros(p), tol);
    if (share >= kPhaseShare) return p;
  }
  return std::nullopt;
}

// Tick instants floor(k * 1e6 / hz) us from a shared origin.
Micros tick_at(long long k, int hz) { return static_cast<Micros>(k * 1'000'000LL / hz); }

// Whether a burst of `runtime` us can start on a refill (origin + m * period) and end on a tick
// (origin + tick_at(k)) when both grids share an origin.
bool fits_aligned_grids(Micros runtime, Micros period, int hz, Micros tol) {
  constexpr int kCycles = 1000;
  for (int m = 0; m < kCycles; ++m) {
    const Micros target = runtime + m * period;
    const long long k = std::llround(static_cast<double>(target) * hz / 1e6);
    for (long long kk = std::max(0LL, k - 1); kk <= k + 1; ++kk)
      if (std::abs(tick_at(kk, hz) - target) <= tol) return true;
  }
  return false;
}

// Throttles begin at runtime accounting, i.e. on ticks, so throttle starts sit on one tick
// grid. Bursts begin on refills; when the refill and tick grids share an origin, burst
// lengths also pin down the tick rate. Prefer the coarsest candidate that fits both, then
// the coarsest that fits the start spacing alone.
std::optional<int> estimate_tick(const std::vector<ThrottleEvent>& events, double period_ms, bool& aligned) {
  std::vector<double> spacings;
  std::vector<Micros> runtimes;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const Micros start = events[i].detected_at_us - events[i].gap_us;
    spacings.push_back(sched::to_ms(start - (events[i - 1].detected_at_us - events[i - 1].gap_us)));
    runtimes.push_back(start - events[i - 1].detected_at_us);
  }
  std::vector<int> candidates(std::begin(kTickCandidates), std::end(kTickCandidates));
  std::sort(candidates.begin(), candidates.end());
  const Micros period = sched::to_micros(period_ms);
  const Micros tol = sched::to_micros(kTickToleranceMs);
  std::optional<int> spacing_only;
  for (int hz : candidates) {
    if (multiple_share(spacings, 1000.0 / hz, kTickToleranceMs) < kConsistentShare) continue;
    if (!spacing_only) spacing_only = hz;
    const auto fits = std::count_if(runtimes.begin(), runtimes.end(),
                                    [&](Micros r) { return fits_aligned_grids(r, period, hz, tol); });
    if (static_cast<double>(fits) >= kConsistentShare * static_cast<double>(runtimes.size())) {
      aligned = true;
      return hz;
    }
  }
  aligned = false;
  return spacing_only;
}

}  // namespace

SchedulerFingerprint analyze(const std::vector<ThrottleEvent>& events, double span_ms) {
  if (!(span_ms > 0.0)) throw ProbeError("probe span must be positive");
  SchedulerFingerprint fp;
  fp.events = events.size();
  fp.span_ms = span_ms;

  double gap_total = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.gap_us <= 0) throw ProbeError("throttle gap must be positive");
    if (e.detected_at_us < e.gap_us) throw ProbeError("throttle detected before the probe started");
    if (i > 0 && e.detected_at_us <= events[i - 1].detected_at_us)
      throw ProbeError("event timestamps must strictly increase");
    if (i > 0 && e.detected_at_us - e.gap_us < events[i - 1].detected_at_us)
      throw ProbeError("throttle gaps overlap");
    fp.durations_ms.push_back(sched::to_ms(e.gap_us));
    gap_total += sched::to_ms(e.gap_us);
    if (i > 0) {
      fp.intervals_ms.push_back(sched::to_ms(e.detected_at_us - events[i - 1].detected_at_us));
      fp.runtimes_ms.push_back(sched::to_ms(e.detected_at_us - e.gap_us - events[i - 1].detected_at_us));
    }
  }
  // The final gap may end after the nominal duration.
  if (!events.empty()) span_ms = std::max(span_ms, sched::to_ms(events.back().detected_at_us));
  fp.span_ms = span_ms;
  fp.duty_cycle = std::max(0.0, span_ms - gap_total) / span_ms;

  if (events.empty()) {
    fp.confidence = "unthrottled or unlimited";
    return fp;
  }
  const auto short_gaps = std::count_if(fp.durations_ms.begin(), fp.durations_ms.end(), [](double d) { return d < 2.0; });
  fp.sub_2ms_fraction = static_cast<double>(short_gaps) / static_cast<double>(fp.durations_ms.size());

  if (!fp.intervals_ms.empty()) {
    const auto bins = histogram(fp.intervals_ms, kHistogramBinMs);
    const auto mode = std::max_element(bins.begin(), bins.end(),
                                       [](const HistogramBin& a, const HistogramBin& b) { return a.count < b.count; });
    fp.interval_mode_ms = mode->center_ms;
  }

  if (events.size() < kMinEventsForEstimates) {
    fp.confidence = "insufficient events";
    fp.notes.push_back("fewer than " + std::to_string(kMinEventsForEstimates) +
                       " throttles; distributions only");
    return fp;
  }

  fp.period_ms = estimate_period(fp.intervals_ms);
  fp.confidence = "ok";
  if (!fp.period_ms) {
    double share = 0.0;
    fp.period_ms = estimate_period_by_phase(events, *std::max_element(fp.intervals_ms.begin(), fp.intervals_ms.end()),
                                            share);
    if (!fp.period_ms) {
      fp.confidence = "ambiguous";
      fp.notes.push_back("no period divides at least 90% of throttle intervals or aligns 75% of detections");
      return fp;
    }
    fp.confidence = "low";
    fp.notes.push_back("intervals are noisy; period from the refill phase shared by " +
                       std::to_string(std::lround(share * 100.0)) + "% of detections");
  }

  bool aligned = false;
  fp.tick_hz = estimate_tick(events, *fp.period_ms, aligned);
  if (!fp.tick_hz) {
    fp.notes.push_back("throttle starts fit no candidate tick rate");
  } else if (!aligned) {
    fp.notes.push_back("tick and refill grids do not share an origin; tick rate from throttle spacing only");
  }

  const double sustained = *fp.period_ms * fp.duty_cycle;
  const double burst = median(fp.runtimes_ms);
  fp.quota_ms = std::min(burst, sustained);
  if (burst > sustained)
    fp.notes.push_back("median burst of " + std::to_string(burst) + " ms exceeds the sustained share of " +
                       std::to_string(sustained) + " ms per period: bursts overrun the quota");
  if (fp.sub_2ms_fraction > 0.0)
    fp.notes.push_back("some throttle durations are below 2 ms; causes are not classified");
  return fp;
}

const std::vector<ReferenceRow>& reference_table() {
  static const std::vector<ReferenceRow> rows = {
      {"AWS Lambda", 20.0, 250},
      {"Google Cloud Run Functions", 100.0, 1000},
      {"IBM Cloud Code Engine Functions", 10.0, 250},
  };
  return rows;
}

std::vector<ReferenceMatch> compare_to_reference(const SchedulerFingerprint& fp, const std::vector<ReferenceRow>& table) {
  std::vector<ReferenceMatch> out;
  for (const auto& row : table) {
    ReferenceMatch m{row};
    m.period_match = fp.period_ms && std::abs(*fp.period_ms - row.period_ms) <= kHistogramBinMs;
    m.tick_match = fp.tick_hz && *fp.tick_hz == row.tick_hz;
    out.push_back(m);
  }
  return out;
}

namespace {

json bins_json(const std::vector<double>& values) {
  json out = json::array();
  for (const auto& b : histogram(values, kHistogramBinMs)) out.push_back({{"center_ms", b.center_ms}, {"count", b.count}});
  return out;
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json fingerprint_doc(const SchedulerFingerprint& fp) {
  return {{"period_ms", optional_json(fp.period_ms)},
          {"quota_ms", optional_json(fp.quota_ms)},
          {"tick_hz", optional_json(fp.tick_hz)},
          {"confidence", fp.confidence},
          {"notes", fp.notes},
          {"events", fp.events},
          {"span_ms", fp.span_ms},
          {"duty_cycle", fp.duty_cycle},
          {"sub_2ms_fraction", fp.sub_2ms_fraction},
          {"interval_mode_ms", optional_json(fp.interval_mode_ms)},
          {"histograms",
           {{"interval_ms", bins_json(fp.intervals_ms)},
            {"duration_ms", bins_json(fp.durations_ms)},
            {"runtime_ms", bins_json(fp.runtimes_ms)}}}};
}

}  // namespace

std::string fingerprint_to_json(const SchedulerFingerprint& fp) { return fingerprint_doc(fp).dump(2) + "\n"; }

std::string fingerprint_report(const SchedulerFingerprint& fp, const std::vector<ReferenceRow>& table) {
  json rows = json::array();
  json matches = json::array();
  for (const auto& m : compare_to_reference(fp, table)) {
    rows.push_back({{"platform", m.row.platform},
                    {"period_ms", m.row.period_ms},
                    {"tick_hz", m.row.tick_hz},
                    {"period_match", m.period_match},
                    {"tick_match", m.tick_match},
                    {"match", m.match()}});
    if (m.match()) matches.push_back(m.row.platform);
  }
  const json doc = {{"fingerprint", fingerprint_doc(fp)}, {"reference", rows}, {"matches", matches}};
  return doc.dump(2) + "\n";
}

}  // namespace faascost::profiler
