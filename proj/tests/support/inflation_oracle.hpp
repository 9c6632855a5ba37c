#pragma once

// Per-record billable resources written directly from each platform's published rules.

#include <string>

#include "faascost/records.hpp"

namespace faascost::testing {

struct NaiveBilled {
  bool ok = true;  // false when the platform cannot host the allocation
  double vcpu_s = 0.0;
  double gb_s = 0.0;
};

// Known platforms: aws-lambda, gcp-cloud-run, cloudflare-workers, azure-functions-consumption.
NaiveBilled naive_billed(const InvocationRecord& r, const std::string& platform);

}  // namespace faascost::testing
