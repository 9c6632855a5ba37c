#pragma once

#include <map>
#include <string>

namespace faascost {

// Resources a sandbox was granted. Memory is in MB (1 GB = 1024 MB).
struct ResourceAllocation {
  double vcpus = 0.0;
  double memory_mb = 0.0;
  std::map<std::string, double> extras;

  friend bool operator==(const ResourceAllocation&, const ResourceAllocation&) = default;
};

// One request from an invocation trace, in canonical units.
struct InvocationRecord {
  std::string function_id;
  std::string instance_id;  // sandbox identity; empty when the trace has none
  double arrival_ts_ms = 0.0;
  double exec_duration_ms = 0.0;
  double init_duration_ms = 0.0;  // 0 for warm requests
  bool is_cold_start = false;
  ResourceAllocation alloc;
  double cpu_usage_avg_vcpus = 0.0;  // mean vCPUs consumed over the execution
  double mem_usage_mb = 0.0;
  std::map<std::string, double> usage_extras;  // absolute amounts for `other` usage resources

  friend bool operator==(const InvocationRecord&, const InvocationRecord&) = default;
};

}  // namespace faascost
