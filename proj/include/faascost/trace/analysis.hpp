#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "faascost/billing/platform_config.hpp"
#include "faascost/decimal.hpp"
#include "faascost/records.hpp"
#include "faascost/trace/ingest.hpp"
#include "faascost/trace/kll_sketch.hpp"

namespace faascost::trace {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Compensated running sum; merge is exact up to the compensation term.
class NeumaierSum {
 public:
  void add(double x);
  void merge(const NeumaierSum& other);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Count, sum and quantile sketch of one per-request quantity.
struct StreamStats {
  explicit StreamStats(int k = 400, std::uint64_t seed = 0) : sketch(k, seed) {}

  void add(double x);
  void merge(const StreamStats& other);
  double mean() const;

  std::uint64_t count = 0;
  NeumaierSum sum;
  KllSketch sketch;
};

// How a trace allocation is carried over to a platform whose knobs are coupled.
enum class AllocationMappingRule {
  larger_of,      // keep whichever of CPU and memory demands more
  memory_driven,  // keep memory, let the platform derive CPU
};

std::string to_string(AllocationMappingRule r);
AllocationMappingRule parse_mapping_rule(const std::string& s);

ResourceAllocation map_allocation(const ResourceAllocation& trace_alloc, const billing::PlatformBillingConfig& config,
                                  AllocationMappingRule rule);

struct BillableResources {
  double billable_time_ms = 0.0;
  double vcpu_s = 0.0;
  double gb_s = 0.0;
};

// Billable vCPU-s and GB-s of one request. Resources the platform does not
// price separately are counted as allocation times billable time.
BillableResources billable_resources(const InvocationRecord& record, const billing::PlatformBillingConfig& config,
                                     AllocationMappingRule rule);

// ---- inflation ----

struct InflationReport {
  std::string platform;
  AllocationMappingRule mapping = AllocationMappingRule::larger_of;
  std::uint64_t records = 0;
  std::uint64_t unmappable = 0;  // allocation beyond what the platform offers
  StreamStats billable_vcpu_s;
  StreamStats billable_gb_s;
  StreamStats actual_vcpu_s;
  StreamStats actual_gb_s;
  double mean_inflation_cpu = 0.0;  // sum billable / sum actual
  double mean_inflation_mem = 0.0;
  std::vector<std::string> flags;
};

class InflationAccumulator {
 public:
  InflationAccumulator(billing::PlatformBillingConfig config, AllocationMappingRule mapping, std::uint64_t seed = 0,
                       int sketch_k = 400);

  void add(const InvocationRecord& r);
  void merge(const InflationAccumulator& other);
  InflationReport report() const;
  const billing::PlatformBillingConfig& config() const { return config_; }

 private:
  billing::PlatformBillingConfig config_;
  InflationReport state_;
};

InflationReport inflation_analysis(std::span<const InvocationRecord> records,
                                   const billing::PlatformBillingConfig& config,
                                   AllocationMappingRule mapping = AllocationMappingRule::larger_of);

// ---- utilization correlation ----

struct CorrelationReport {
  std::uint64_t n = 0;
  double pearson_r = 0.0;
  std::vector<std::pair<double, double>> sample;  // (cpu utilization, memory utilization)
  StreamStats cpu_util;
  StreamStats mem_util;
  double fraction_cpu_below_half = 0.0;
  double fraction_mem_below_half = 0.0;
};

class CorrelationAccumulator {
 public:
  explicit CorrelationAccumulator(std::uint64_t seed = 0, std::size_t reservoir_cap = 100000, int sketch_k = 400);

  /// Records without a positive CPU and memory allocation are ignored.
  void add(const InvocationRecord& r);
  void add_pair(double cpu_util, double mem_util);
  void merge(const CorrelationAccumulator& other);
  /// Throws AnalysisError on fewer than two points or zero variance.
  CorrelationReport report() const;
  std::uint64_t count() const { return n_; }

 private:
  std::uint64_t n_ = 0;
  double mean_x_ = 0.0;
  double mean_y_ = 0.0;
  double m2x_ = 0.0;
  double m2y_ = 0.0;
  double cxy_ = 0.0;
  std::uint64_t below_half_x_ = 0;
  std::uint64_t below_half_y_ = 0;
  std::size_t cap_;
  std::vector<std::pair<double, double>> reservoir_;
  StreamStats x_stats_;
  StreamStats y_stats_;
  std::mt19937_64 rng_;
};

CorrelationReport utilization_correlation(std::span<const InvocationRecord> records, std::uint64_t seed = 0);

// ---- cold starts ----

struct ColdStartDiff {
  std::string instance_id;
  double init_vcpu_s = 0.0;
  double init_gb_s = 0.0;
  double subsequent_vcpu_s = 0.0;
  double subsequent_gb_s = 0.0;
  std::uint64_t requests = 0;
  bool zero_init = false;

  double diff_vcpu_s() const { return subsequent_vcpu_s - init_vcpu_s; }
  double diff_gb_s() const { return subsequent_gb_s - init_gb_s; }
};

struct ColdStartReport {
  std::uint64_t groups = 0;       // instances plus sessionized groups
  std::uint64_t sessionized = 0;  // groups formed without an instance id
  std::uint64_t cold_starts = 0;  // groups that contain a cold start
  std::uint64_t zero_init = 0;
  std::uint64_t extra_cold_records = 0;  // cold records after the first in a group
  double fraction_nonpositive = 0.0;     // both differences <= 0
  double fraction_nonpositive_cpu = 0.0;
  double fraction_nonpositive_mem = 0.0;
  StreamStats diff_vcpu_s;
  StreamStats diff_gb_s;
  double total_subsequent_vcpu_s = 0.0;  // over every group, cold or not
  double total_subsequent_gb_s = 0.0;
  double total_request_vcpu_s = 0.0;  // over every record
  double total_request_gb_s = 0.0;
  std::vector<ColdStartDiff> diffs;  // sorted by instance id
};

class ColdStartAccumulator {
 public:
  ColdStartAccumulator(billing::PlatformBillingConfig config, double session_gap_ms = 900000.0, std::uint64_t seed = 0,
                       int sketch_k = 400);

  /// `seq` is the record's position in the trace.
  void add(const InvocationRecord& r, std::uint64_t seq);
  void merge(const ColdStartAccumulator& other);
  ColdStartReport report() const;

 private:
  struct Group {
    bool has_cold = false;
    double cold_arrival_ms = 0.0;
    std::uint64_t cold_seq = 0;
    double init_vcpu_s = 0.0;
    double init_gb_s = 0.0;
    bool zero_init = false;
    std::uint64_t extra_cold = 0;
    NeumaierSum vcpu_s;
    NeumaierSum gb_s;
    std::uint64_t requests = 0;
  };
  struct Loose {
    std::string function_id;
    double arrival_ms;
    double end_ms;
    std::uint64_t seq;
    bool cold;
    double init_vcpu_s;
    double init_gb_s;
    double vcpu_s;
    double gb_s;
  };

  static void add_to_group(Group& g, bool cold, double arrival, std::uint64_t seq, double init_vcpu_s,
                           double init_gb_s, double vcpu_s, double gb_s);

  billing::PlatformBillingConfig config_;
  double session_gap_ms_;
  std::uint64_t seed_;
  int sketch_k_;
  std::map<std::string, Group> groups_;
  std::vector<Loose> loose_;
  NeumaierSum total_vcpu_s_;
  NeumaierSum total_gb_s_;
};

ColdStartReport cold_start_differential(std::span<const InvocationRecord> records,
                                        const billing::PlatformBillingConfig& config,
                                        double session_gap_ms = 900000.0);

// ---- rounding ----

enum class MemoryBasis { usage, allocation };

struct RoundingPolicy {
  std::string name;
  Decimal granularity_ms = Decimal::from_int(1);
  Decimal cutoff_ms;
  std::optional<Decimal> memory_granularity_mb;
  MemoryBasis memory_basis = MemoryBasis::usage;
};

std::vector<RoundingPolicy> default_rounding_policies();
// "name:granularity_ms[:cutoff_ms[:memory_granularity_mb]]"
RoundingPolicy parse_rounding_policy(const std::string& spec);

struct RoundingStats {
  RoundingPolicy policy;
  std::uint64_t records = 0;
  std::uint64_t excluded_short = 0;  // exec below 1 ms
  StreamStats time_residual_ms;
  StreamStats mem_residual_gb_s;  // empty without a memory granularity
};

class RoundingAccumulator {
 public:
  explicit RoundingAccumulator(std::vector<RoundingPolicy> policies, std::uint64_t seed = 0, int sketch_k = 400);

  void add(const InvocationRecord& r);
  void merge(const RoundingAccumulator& other);
  std::vector<RoundingStats> report() const { return stats_; }

 private:
  std::vector<RoundingStats> stats_;
};

std::vector<RoundingStats> rounding_up_stats(std::span<const InvocationRecord> records,
                                             const std::vector<RoundingPolicy>& policies);

// ---- whole-trace pipeline ----

struct AnalysisOptions {
  std::vector<billing::PlatformBillingConfig> platforms;
  AllocationMappingRule mapping = AllocationMappingRule::larger_of;
  std::optional<billing::PlatformBillingConfig> cold_start_config;
  std::vector<RoundingPolicy> rounding_policies = default_rounding_policies();
  bool inflation = true;
  bool correlation = true;
  bool cold_start = true;
  bool rounding = true;
  std::uint64_t seed = 0;
  std::size_t reservoir_cap = 100000;
  double session_gap_ms = 900000.0;
  int sketch_k = 400;
  std::size_t chunk_size = 1 << 16;
  unsigned threads = 0;  // 0 picks the hardware concurrency
};

struct TraceReport {
  IngestCounters ingest;
  MemorySemantics memory_semantics = MemorySemantics::peak;
  std::vector<InflationReport> inflation;
  std::optional<CorrelationReport> correlation;
  std::string correlation_error;
  std::optional<ColdStartReport> cold_start;
  std::string cold_start_platform;
  std::vector<RoundingStats> rounding;
};

/// Streams the reader through every selected analysis. Output depends on the
/// input, options and seed only, not on the thread count.
TraceReport analyze_trace(TraceReader& reader, const AnalysisOptions& options);

std::string report_to_json(const TraceReport& report, const AnalysisOptions& options);

// Writes fig2.csv through fig5.csv into `dir`.
void write_figure_tables(const TraceReport& report, const AnalysisOptions& options,
                         const std::filesystem::path& dir);

}  // namespace faascost::trace
