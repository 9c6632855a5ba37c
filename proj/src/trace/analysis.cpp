#include "faascost/trace/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "faascost/billing/billing.hpp"

namespace faascost::trace {

using billing::BillingError;
using billing::PlatformBillingConfig;
using billing::ResourceId;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void require_time_granularity(const PlatformBillingConfig& config) {
  if (!config.time_granularity_ms)
    throw AnalysisError("platform '" + config.name + "' has no documented time granularity");
}

}  // namespace

void NeumaierSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

void NeumaierSum::merge(const NeumaierSum& other) {
  add(other.sum_);
  comp_ += other.comp_;
}

void StreamStats::add(double x) {
  ++count;
  sum.add(x);
  sketch.update(x);
}

void StreamStats::merge(const StreamStats& other) {
  count += other.count;
  sum.merge(other.sum);
  sketch.merge(other.sketch);
}

double StreamStats::mean() const { return count == 0 ? kNaN : sum.value() / static_cast<double>(count); }

std::string to_string(AllocationMappingRule r) {
  return r == AllocationMappingRule::larger_of ? "larger_of" : "memory_driven";
}

AllocationMappingRule parse_mapping_rule(const std::string& s) {
  if (s == "larger_of") return AllocationMappingRule::larger_of;
  if (s == "memory_driven") return AllocationMappingRule::memory_driven;
  throw AnalysisError("unknown allocation mapping rule '" + s + "'");
}

ResourceAllocation map_allocation(const ResourceAllocation& trace_alloc, const PlatformBillingConfig& config,
                                  AllocationMappingRule rule) {
  if (rule == AllocationMappingRule::memory_driven &&
      !std::holds_alternative<billing::Independent>(config.knob_coupling)) {
    ResourceAllocation req = trace_alloc;
    req.vcpus = 0.0;
    return billing::normalize_allocation(req, config);
  }
  return billing::normalize_allocation(trace_alloc, config);
}

BillableResources billable_resources(const InvocationRecord& record, const PlatformBillingConfig& config,
                                     AllocationMappingRule rule) {
  InvocationRecord mapped = record;
  mapped.alloc = map_allocation(record.alloc, config, rule);
  const Decimal t_ms = billing::record_billable_time(mapped, config);
  const Decimal exec_ms = Decimal::from_double(record.exec_duration_ms);

  BillableResources out;
  out.billable_time_ms = t_ms.to_double();

  auto over_time = [&](Decimal amount) { return Decimal::product({amount, t_ms}, 1000).to_double(); };

  if (const auto* usage = config.find_usage(ResourceId::vcpu())) {
    const Decimal cpu_ms = Decimal::product_ceil_to_multiple(Decimal::from_double(record.cpu_usage_avg_vcpus), exec_ms,
                                                             1, usage->granularity);
    out.vcpu_s = cpu_ms.to_double() / 1000.0;
  } else if (const auto* alloc = config.find_alloc(ResourceId::vcpu())) {
    out.vcpu_s = over_time(billing::alloc_amount(*alloc, mapped).ceil_to_multiple(alloc->granularity));
  } else {
    out.vcpu_s = over_time(Decimal::from_double(mapped.alloc.vcpus));
  }

  if (const auto* usage = config.find_usage(ResourceId::memory_gb())) {
    out.gb_s = Decimal::product_ceil_to_multiple(billing::memory_gb(record.mem_usage_mb), exec_ms, 1000,
                                                 usage->granularity)
                   .to_double();
  } else if (const auto* alloc = config.find_alloc(ResourceId::memory_gb())) {
    out.gb_s = over_time(billing::alloc_amount(*alloc, mapped).ceil_to_multiple(alloc->granularity));
  } else {
    out.gb_s = over_time(billing::memory_gb(mapped.alloc.memory_mb));
  }
  return out;
}

// ---- inflation ----

InflationAccumulator::InflationAccumulator(PlatformBillingConfig config, AllocationMappingRule mapping,
                                           std::uint64_t seed, int sketch_k)
    : config_(std::move(config)) {
  require_time_granularity(config_);
  state_.platform = config_.name;
  state_.mapping = mapping;
  state_.billable_vcpu_s = StreamStats(sketch_k, mix(seed, 1));
  state_.billable_gb_s = StreamStats(sketch_k, mix(seed, 2));
  state_.actual_vcpu_s = StreamStats(sketch_k, mix(seed, 3));
  state_.actual_gb_s = StreamStats(sketch_k, mix(seed, 4));
}

void InflationAccumulator::add(const InvocationRecord& r) {
  BillableResources b;
  try {
    b = billable_resources(r, config_, state_.mapping);
  } catch (const BillingError&) {
    ++state_.unmappable;
    return;
  }
  ++state_.records;
  const double exec_s = r.exec_duration_ms / 1000.0;
  state_.billable_vcpu_s.add(b.vcpu_s);
  state_.billable_gb_s.add(b.gb_s);
  state_.actual_vcpu_s.add(r.cpu_usage_avg_vcpus * exec_s);
  state_.actual_gb_s.add(r.mem_usage_mb / 1024.0 * exec_s);
}

void InflationAccumulator::merge(const InflationAccumulator& other) {
  state_.records += other.state_.records;
  state_.unmappable += other.state_.unmappable;
  state_.billable_vcpu_s.merge(other.state_.billable_vcpu_s);
  state_.billable_gb_s.merge(other.state_.billable_gb_s);
  state_.actual_vcpu_s.merge(other.state_.actual_vcpu_s);
  state_.actual_gb_s.merge(other.state_.actual_gb_s);
}

InflationReport InflationAccumulator::report() const {
  InflationReport out = state_;
  auto ratio = [](const StreamStats& num, const StreamStats& den) {
    const double d = den.sum.value();
    return d > 0.0 ? num.sum.value() / d : kNaN;
  };
  out.mean_inflation_cpu = ratio(out.billable_vcpu_s, out.actual_vcpu_s);
  out.mean_inflation_mem = ratio(out.billable_gb_s, out.actual_gb_s);
  out.flags.clear();
  if (out.records == 0) out.flags.emplace_back("no billable records");
  if (out.unmappable > 0) out.flags.emplace_back("some allocations exceed the platform maximum");
  if (std::isnan(out.mean_inflation_cpu)) out.flags.emplace_back("no actual cpu usage");
  if (std::isnan(out.mean_inflation_mem)) out.flags.emplace_back("no actual memory usage");
  if (out.mean_inflation_cpu < 1.0) out.flags.emplace_back("cpu inflation below 1");
  if (out.mean_inflation_mem < 1.0) out.flags.emplace_back("memory inflation below 1");
  return out;
}

InflationReport inflation_analysis(std::span<const InvocationRecord> records, const PlatformBillingConfig& config,
                                   AllocationMappingRule mapping) {
  if (records.empty()) throw AnalysisError("no records");
  InflationAccumulator acc(config, mapping);
  for (const auto& r : records) acc.add(r);
  return acc.report();
}

// ---- correlation ----

CorrelationAccumulator::CorrelationAccumulator(std::uint64_t seed, std::size_t reservoir_cap, int sketch_k)
    : cap_(reservoir_cap), x_stats_(sketch_k, mix(seed, 11)), y_stats_(sketch_k, mix(seed, 12)), rng_(mix(seed, 13)) {}

void CorrelationAccumulator::add(const InvocationRecord& r) {
  if (!(r.alloc.vcpus > 0.0) || !(r.alloc.memory_mb > 0.0)) return;
  add_pair(r.cpu_usage_avg_vcpus / r.alloc.vcpus, r.mem_usage_mb / r.alloc.memory_mb);
}

void CorrelationAccumulator::add_pair(double x, double y) {
  ++n_;
  const double n = static_cast<double>(n_);
  const double dx = x - mean_x_;
  mean_x_ += dx / n;
  const double dy = y - mean_y_;
  mean_y_ += dy / n;
  m2x_ += dx * (x - mean_x_);
  m2y_ += dy * (y - mean_y_);
  cxy_ += dx * (y - mean_y_);
  if (x < 0.5) ++below_half_x_;
  if (y < 0.5) ++below_half_y_;
  x_stats_.add(x);
  y_stats_.add(y);

  if (reservoir_.size() < cap_) {
    reservoir_.emplace_back(x, y);
  } else if (cap_ > 0) {
    std::uniform_int_distribution<std::uint64_t> pick(0, n_ - 1);
    const auto j = pick(rng_);
    if (j < cap_) reservoir_[j] = {x, y};
  }
}

void CorrelationAccumulator::merge(const CorrelationAccumulator& other) {
  if (other.n_ == 0) return;
  const std::uint64_t na = n_;
  const std::uint64_t nb = other.n_;
  if (na == 0) {
    mean_x_ = other.mean_x_;
    mean_y_ = other.mean_y_;
    m2x_ = other.m2x_;
    m2y_ = other.m2y_;
    cxy_ = other.cxy_;
  } else {
    const double n = static_cast<double>(na + nb);
    const double w = static_cast<double>(na) * static_cast<double>(nb) / n;
    const double dx = other.mean_x_ - mean_x_;
    const double dy = other.mean_y_ - mean_y_;
    mean_x_ += dx * static_cast<double>(nb) / n;
    mean_y_ += dy * static_cast<double>(nb) / n;
    m2x_ += other.m2x_ + dx * dx * w;
    m2y_ += other.m2y_ + dy * dy * w;
    cxy_ += other.cxy_ + dx * dy * w;
  }
  n_ = na + nb;
  below_half_x_ += other.below_half_x_;
  below_half_y_ += other.below_half_y_;
  x_stats_.merge(other.x_stats_);
  y_stats_.merge(other.y_stats_);

  if (reservoir_.size() + other.reservoir_.size() <= cap_) {
    reservoir_.insert(reservoir_.end(), other.reservoir_.begin(), other.reservoir_.end());
    return;
  }
  // Each reservoir is a uniform sample of its stream. Shuffle both, then draw
  // how many slots each side fills without replacement from the populations.
  auto a = reservoir_;
  auto b = other.reservoir_;
  std::shuffle(a.begin(), a.end(), rng_);
  std::shuffle(b.begin(), b.end(), rng_);
  std::uint64_t rem_a = na;
  std::uint64_t rem_b = nb;
  std::size_t take_a = 0;
  std::size_t take_b = 0;
  for (std::size_t i = 0; i < cap_; ++i) {
    std::uniform_int_distribution<std::uint64_t> pick(0, rem_a + rem_b - 1);
    if (pick(rng_) < rem_a) {
      ++take_a;
      --rem_a;
    } else {
      ++take_b;
      --rem_b;
    }
  }
  reservoir_.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(take_a));
  reservoir_.insert(reservoir_.end(), b.begin(), b.begin() + static_cast<std::ptrdiff_t>(take_b));
}

CorrelationReport CorrelationAccumulator::report() const {
  if (n_ < 2) throw AnalysisError("correlation needs at least 2 records with positive allocations");
  if (!(m2x_ > 0.0) || !(m2y_ > 0.0)) throw AnalysisError("degenerate correlation");
  CorrelationReport out;
  out.n = n_;
  out.pearson_r = std::clamp(cxy_ / std::sqrt(m2x_ * m2y_), -1.0, 1.0);
  out.sample = reservoir_;
  out.cpu_util = x_stats_;
  out.mem_util = y_stats_;
  out.fraction_cpu_below_half = static_cast<double>(below_half_x_) / static_cast<double>(n_);
  out.fraction_mem_below_half = static_cast<double>(below_half_y_) / static_cast<double>(n_);
  return out;
}

CorrelationReport utilization_correlation(std::span<const InvocationRecord> records, std::uint64_t seed) {
  CorrelationAccumulator acc(seed);
  for (const auto& r : records) acc.add(r);
  return acc.report();
}

// ---- cold starts ----

ColdStartAccumulator::ColdStartAccumulator(PlatformBillingConfig config, double session_gap_ms, std::uint64_t seed,
                                           int sketch_k)
    : config_(std::move(config)), session_gap_ms_(session_gap_ms), seed_(seed), sketch_k_(sketch_k) {
  require_time_granularity(config_);
  if (!(session_gap_ms_ > 0.0)) throw AnalysisError("session gap must be positive");
}

void ColdStartAccumulator::add_to_group(Group& g, bool cold, double arrival, std::uint64_t seq, double init_vcpu_s,
                                        double init_gb_s, double vcpu_s, double gb_s) {
  ++g.requests;
  g.vcpu_s.add(vcpu_s);
  g.gb_s.add(gb_s);
  if (!cold) return;
  const bool earlier = !g.has_cold || arrival < g.cold_arrival_ms || (arrival == g.cold_arrival_ms && seq < g.cold_seq);
  if (g.has_cold) ++g.extra_cold;
  if (earlier) {
    g.has_cold = true;
    g.cold_arrival_ms = arrival;
    g.cold_seq = seq;
    g.init_vcpu_s = init_vcpu_s;
    g.init_gb_s = init_gb_s;
    g.zero_init = init_vcpu_s == 0.0 && init_gb_s == 0.0;
  }
}

void ColdStartAccumulator::add(const InvocationRecord& r, std::uint64_t seq) {
  const double t_ms = billing::round_billable_time(Decimal::from_double(r.exec_duration_ms), config_).to_double();
  const double gb = r.alloc.memory_mb / 1024.0;
  const double vcpu_s = r.alloc.vcpus * t_ms / 1000.0;
  const double gb_s = gb * t_ms / 1000.0;
  const double init_vcpu_s = r.is_cold_start ? r.alloc.vcpus * r.init_duration_ms / 1000.0 : 0.0;
  const double init_gb_s = r.is_cold_start ? gb * r.init_duration_ms / 1000.0 : 0.0;
  total_vcpu_s_.add(vcpu_s);
  total_gb_s_.add(gb_s);
  if (r.instance_id.empty()) {
    loose_.push_back({r.function_id, r.arrival_ts_ms, r.arrival_ts_ms + r.exec_duration_ms, seq, r.is_cold_start,
                      init_vcpu_s, init_gb_s, vcpu_s, gb_s});
    return;
  }
  add_to_group(groups_[r.instance_id], r.is_cold_start, r.arrival_ts_ms, seq, init_vcpu_s, init_gb_s, vcpu_s, gb_s);
}

void ColdStartAccumulator::merge(const ColdStartAccumulator& other) {
  for (const auto& [id, og] : other.groups_) {
    auto [it, inserted] = groups_.try_emplace(id, og);
    if (inserted) continue;
    Group& g = it->second;
    g.requests += og.requests;
    g.vcpu_s.merge(og.vcpu_s);
    g.gb_s.merge(og.gb_s);
    g.extra_cold += og.extra_cold;
    if (og.has_cold) {
      if (g.has_cold) ++g.extra_cold;
      const bool earlier = !g.has_cold || og.cold_arrival_ms < g.cold_arrival_ms ||
                           (og.cold_arrival_ms == g.cold_arrival_ms && og.cold_seq < g.cold_seq);
      if (earlier) {
        g.has_cold = true;
        g.cold_arrival_ms = og.cold_arrival_ms;
        g.cold_seq = og.cold_seq;
        g.init_vcpu_s = og.init_vcpu_s;
        g.init_gb_s = og.init_gb_s;
        g.zero_init = og.zero_init;
      }
    }
  }
  loose_.insert(loose_.end(), other.loose_.begin(), other.loose_.end());
  total_vcpu_s_.merge(other.total_vcpu_s_);
  total_gb_s_.merge(other.total_gb_s_);
}

ColdStartReport ColdStartAccumulator::report() const {
  std::vector<std::pair<std::string, Group>> all(groups_.begin(), groups_.end());

  // Sessionize records without an instance id: a new session starts at a cold
  // start or after an idle gap longer than the threshold.
  auto loose = loose_;
  std::sort(loose.begin(), loose.end(), [](const Loose& a, const Loose& b) {
    if (a.function_id != b.function_id) return a.function_id < b.function_id;
    if (a.arrival_ms != b.arrival_ms) return a.arrival_ms < b.arrival_ms;
    return a.seq < b.seq;
  });
  std::uint64_t sessionized = 0;
  std::size_t i = 0;
  while (i < loose.size()) {
    const std::string& fn = loose[i].function_id;
    std::uint64_t session = 0;
    Group g;
    double last_end = loose[i].end_ms;
    std::size_t in_session = 0;
    for (; i < loose.size() && loose[i].function_id == fn; ++i) {
      const Loose& r = loose[i];
      if (in_session > 0 && (r.cold || r.arrival_ms - last_end > session_gap_ms_)) {
        all.emplace_back(fn + "#session-" + std::to_string(session++), g);
        ++sessionized;
        g = Group{};
        in_session = 0;
      }
      add_to_group(g, r.cold, r.arrival_ms, r.seq, r.init_vcpu_s, r.init_gb_s, r.vcpu_s, r.gb_s);
      last_end = in_session == 0 ? r.end_ms : std::max(last_end, r.end_ms);
      ++in_session;
    }
    all.emplace_back(fn + "#session-" + std::to_string(session), g);
    ++sessionized;
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  ColdStartReport out;
  out.diff_vcpu_s = StreamStats(sketch_k_, mix(seed_, 21));
  out.diff_gb_s = StreamStats(sketch_k_, mix(seed_, 22));
  out.groups = all.size();
  out.sessionized = sessionized;
  NeumaierSum sub_vcpu;
  NeumaierSum sub_gb;
  std::uint64_t nonpos = 0;
  std::uint64_t nonpos_cpu = 0;
  std::uint64_t nonpos_mem = 0;
  for (const auto& [id, g] : all) {
    sub_vcpu.merge(g.vcpu_s);
    sub_gb.merge(g.gb_s);
    out.extra_cold_records += g.extra_cold;
    if (!g.has_cold) continue;
    ColdStartDiff d;
    d.instance_id = id;
    d.init_vcpu_s = g.init_vcpu_s;
    d.init_gb_s = g.init_gb_s;
    d.subsequent_vcpu_s = g.vcpu_s.value();
    d.subsequent_gb_s = g.gb_s.value();
    d.requests = g.requests;
    d.zero_init = g.zero_init;
    ++out.cold_starts;
    if (d.zero_init) ++out.zero_init;
    const bool cpu_np = d.diff_vcpu_s() <= 0.0;
    const bool mem_np = d.diff_gb_s() <= 0.0;
    nonpos_cpu += cpu_np;
    nonpos_mem += mem_np;
    nonpos += cpu_np && mem_np;
    out.diff_vcpu_s.add(d.diff_vcpu_s());
    out.diff_gb_s.add(d.diff_gb_s());
    out.diffs.push_back(std::move(d));
  }
  if (out.cold_starts > 0) {
    const double n = static_cast<double>(out.cold_starts);
    out.fraction_nonpositive = static_cast<double>(nonpos) / n;
    out.fraction_nonpositive_cpu = static_cast<double>(nonpos_cpu) / n;
    out.fraction_nonpositive_mem = static_cast<double>(nonpos_mem) / n;
  }
  out.total_subsequent_vcpu_s = sub_vcpu.value();
  out.total_subsequent_gb_s = sub_gb.value();
  out.total_request_vcpu_s = total_vcpu_s_.value();
  out.total_request_gb_s = total_gb_s_.value();
  return out;
}

ColdStartReport cold_start_differential(std::span<const InvocationRecord> records, const PlatformBillingConfig& config,
                                        double session_gap_ms) {
  if (records.empty()) throw AnalysisError("no records");
  ColdStartAccumulator acc(config, session_gap_ms);
  std::uint64_t seq = 0;
  for (const auto& r : records) acc.add(r, seq++);
  return acc.report();
}

// ---- rounding ----

std::vector<RoundingPolicy> default_rounding_policies() {
  return {
      {"granularity-100ms", Decimal::from_int(100), Decimal{}, std::nullopt, MemoryBasis::usage},
      {"granularity-1ms-cutoff-100ms", Decimal::from_int(1), Decimal::from_int(100), Decimal::from_int(128),
       MemoryBasis::usage},
  };
}

RoundingPolicy parse_rounding_policy(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = spec.find(':', start);
    parts.push_back(spec.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 4 || parts[0].empty())
    throw AnalysisError("rounding policy must look like name:granularity_ms[:cutoff_ms[:memory_granularity_mb]]");
  RoundingPolicy p;
  p.name = parts[0];
  try {
    p.granularity_ms = Decimal::parse(parts[1]);
    if (parts.size() > 2 && !parts[2].empty()) p.cutoff_ms = Decimal::parse(parts[2]);
    if (parts.size() > 3 && !parts[3].empty()) p.memory_granularity_mb = Decimal::parse(parts[3]);
  } catch (const std::invalid_argument& e) {
    throw AnalysisError("bad number in rounding policy '" + spec + "': " + e.what());
  }
  if (!(p.granularity_ms > Decimal{}) || p.cutoff_ms.is_negative() ||
      (p.memory_granularity_mb && !(*p.memory_granularity_mb > Decimal{})))
    throw AnalysisError("rounding policy '" + spec + "' needs positive granularities and a nonnegative cutoff");
  return p;
}

RoundingAccumulator::RoundingAccumulator(std::vector<RoundingPolicy> policies, std::uint64_t seed, int sketch_k) {
  std::uint64_t salt = 100;
  for (auto& p : policies) {
    RoundingStats s{std::move(p), 0, 0, StreamStats(sketch_k, mix(seed, salt)), StreamStats(sketch_k, mix(seed, salt + 1))};
    salt += 2;
    stats_.push_back(std::move(s));
  }
}

void RoundingAccumulator::add(const InvocationRecord& r) {
  const bool short_request = r.exec_duration_ms < 1.0;
  const Decimal raw = Decimal::from_double(r.exec_duration_ms);
  for (auto& s : stats_) {
    if (short_request) {
      ++s.excluded_short;
      continue;
    }
    ++s.records;
    const Decimal billed = max(raw, s.policy.cutoff_ms).ceil_to_multiple(s.policy.granularity_ms);
    s.time_residual_ms.add((billed - raw).to_double());
    if (s.policy.memory_granularity_mb) {
      const Decimal mem = Decimal::from_double(s.policy.memory_basis == MemoryBasis::usage ? r.mem_usage_mb
                                                                                         : r.alloc.memory_mb);
      const Decimal billed_mem = mem.ceil_to_multiple(*s.policy.memory_granularity_mb);
      const Decimal residual =
          Decimal::product({billed_mem, billed}, 1024 * 1000) - Decimal::product({mem, raw}, 1024 * 1000);
      s.mem_residual_gb_s.add(residual.to_double());
    }
  }
}

void RoundingAccumulator::merge(const RoundingAccumulator& other) {
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    stats_[i].records += other.stats_[i].records;
    stats_[i].excluded_short += other.stats_[i].excluded_short;
    stats_[i].time_residual_ms.merge(other.stats_[i].time_residual_ms);
    stats_[i].mem_residual_gb_s.merge(other.stats_[i].mem_residual_gb_s);
  }
}

std::vector<RoundingStats> rounding_up_stats(std::span<const InvocationRecord> records,
                                             const std::vector<RoundingPolicy>& policies) {
  if (records.empty()) throw AnalysisError("no records");
  RoundingAccumulator acc(policies);
  for (const auto& r : records) acc.add(r);
  return acc.report();
}

}  // namespace faascost::trace
