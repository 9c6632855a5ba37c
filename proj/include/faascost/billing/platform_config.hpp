#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "faascost/decimal.hpp"

namespace faascost::billing {

class BillingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Identity of a billable resource. `vcpu` and `memory_gb` are understood by
// the engine; anything else is priced from the record's extras maps.
class ResourceId {
 public:
  enum class Kind { vcpu, memory_gb, other };

  static ResourceId vcpu() { return ResourceId(Kind::vcpu, "vcpu"); }
  static ResourceId memory_gb() { return ResourceId(Kind::memory_gb, "memory_gb"); }
  static ResourceId other(std::string name);
  static ResourceId parse(std::string_view name);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  friend bool operator==(const ResourceId& a, const ResourceId& b) { return a.name_ == b.name_; }
  friend auto operator<=>(const ResourceId& a, const ResourceId& b) { return a.name_ <=> b.name_; }

 private:
  ResourceId(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {}
  Kind kind_;
  std::string name_;
};

enum class BillableTimeKind { execution, turnaround, cpu_time_only };

// Which quantity an allocation-style term multiplies by billable time.
// `consumed` covers plans that round observed usage and bill it over wall
// time (memory on a consumption plan).
enum class Metering { allocated, consumed };

struct AllocResourceSpec {
  ResourceId resource = ResourceId::vcpu();
  Decimal granularity;                           // G_r, in resource units
  std::optional<Decimal> unit_price_usd_per_unit_second;  // C_r; nullopt = not published
  Metering metering = Metering::allocated;
};

struct UsageResourceSpec {
  ResourceId resource = ResourceId::vcpu();
  Decimal granularity;
  std::optional<Decimal> unit_price_usd_per_unit;
};

struct Independent {};

struct CpuProportionalToMemory {
  double mem_per_vcpu_mb = 1769.0;
};

struct FixedCombo {
  double vcpus = 0.0;
  double memory_mb = 0.0;
};

struct FixedCombos {
  std::vector<FixedCombo> combos;  // strictly increasing in memory
};

// vCPU : memory-GB must lie between 1:min_gb_per_vcpu and 1:max_gb_per_vcpu.
struct RatioConstrained {
  double min_gb_per_vcpu = 1.0;
  double max_gb_per_vcpu = 4.0;
  double cpu_step = 0.05;
  double mem_step_mb = 64.0;
};

using KnobCoupling = std::variant<Independent, CpuProportionalToMemory, FixedCombos, RatioConstrained>;

struct PlatformBillingConfig {
  std::string name;
  BillableTimeKind billable_time_kind = BillableTimeKind::execution;
  std::optional<Decimal> time_granularity_ms;  // nullopt = not documented
  Decimal time_min_cutoff_ms;                  // 0 = none
  std::vector<AllocResourceSpec> alloc_resources;
  std::vector<UsageResourceSpec> usage_resources;
  std::optional<Decimal> invocation_fee_usd;   // C_0
  KnobCoupling knob_coupling = Independent{};
  std::string notes;

  const AllocResourceSpec* find_alloc(const ResourceId& id) const;
  const UsageResourceSpec* find_usage(const ResourceId& id) const;
};

// Throws ConfigError describing the first violated invariant.
void validate(const PlatformBillingConfig& config);

PlatformBillingConfig parse_platform_config(std::string_view json_text);
PlatformBillingConfig load_platform_config(const std::filesystem::path& path);
std::string to_json(const PlatformBillingConfig& config);

std::string_view to_string(BillableTimeKind kind);
std::string_view to_string(Metering metering);

// Resolves a platform name or path. Search order: explicit directory, then
// $FAASCOST_CONFIG_DIR, then the directory bundled with the build.
std::filesystem::path resolve_platform_path(std::string_view name_or_path,
                                            const std::optional<std::filesystem::path>& explicit_dir = std::nullopt);
std::filesystem::path bundled_config_dir();
std::vector<std::string> list_platforms(const std::filesystem::path& dir);

}  // namespace faascost::billing
