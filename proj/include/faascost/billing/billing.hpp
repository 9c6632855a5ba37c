#pragma once

#include <map>

#include "faascost/billing/platform_config.hpp"
#include "faascost/decimal.hpp"
#include "faascost/records.hpp"

namespace faascost::billing {

struct CostTerm {
  Decimal billable_amount;  // rounded ALLOC(r) or USG(r), in resource units
  Decimal usd;

  friend bool operator==(const CostTerm&, const CostTerm&) = default;
};

struct CostBreakdown {
  Decimal billable_time_ms;
  std::map<ResourceId, CostTerm> alloc_terms;
  std::map<ResourceId, CostTerm> usage_terms;
  Decimal fee_usd;
  Decimal total_usd;
};

// The allocation the platform would actually grant for a request.
ResourceAllocation normalize_allocation(const ResourceAllocation& requested, const PlatformBillingConfig& config);

// Cutoff first, then ceil to the time granularity.
Decimal round_billable_time(Decimal raw_ms, const PlatformBillingConfig& config);

// For cpu_time_only plans pass consumed CPU time as raw_execution_ms; init is
// ignored there and for execution plans.
Decimal billable_time(Decimal raw_execution_ms, Decimal init_ms, const PlatformBillingConfig& config);
double billable_time(double raw_execution_ms, double init_ms, const PlatformBillingConfig& config);

// Billable time of a record under the config's time basis.
Decimal record_billable_time(const InvocationRecord& record, const PlatformBillingConfig& config);

// Amount fed into the allocation term for `spec` (before granularity rounding).
Decimal alloc_amount(const AllocResourceSpec& spec, const InvocationRecord& record);

// Expects an allocation already passed through normalize_allocation.
CostBreakdown compute_cost(const InvocationRecord& record, const PlatformBillingConfig& config);

// Wall time whose allocation charge equals the invocation fee.
Decimal fee_equivalent_walltime(const PlatformBillingConfig& config, const ResourceAllocation& allocation);

// MB expressed in GB (1024 MB per GB), rounded to the decimal scale.
Decimal memory_gb(double memory_mb);

}  // namespace faascost::billing
