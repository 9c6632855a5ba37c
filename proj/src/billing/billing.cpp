#include "faascost/billing/billing.hpp"

#include <cmath>

#include "wide.hpp"

namespace faascost::billing {

namespace {

constexpr double kRelTolerance = 1e-12;

bool exceeds(double a, double b) { return a > b * (1.0 + kRelTolerance) + 1e-12; }

Decimal ceil_step(double value, double step) {
  return Decimal::from_double(value).ceil_to_multiple(Decimal::from_double(step));
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw BillingError(std::string(what) + " must be a finite value >= 0");
}

ResourceAllocation normalize_ratio(const ResourceAllocation& req, const RatioConstrained& rule) {
  ResourceAllocation out = req;
  Decimal cpu = ceil_step(req.vcpus, rule.cpu_step);
  Decimal mem_mb = ceil_step(req.memory_mb, rule.mem_step_mb);
  if (cpu.is_zero() && mem_mb.is_zero()) {
    out.vcpus = 0.0;
    out.memory_mb = 0.0;
    return out;
  }
  const Decimal mb_per_gb = Decimal::from_int(1024);
  const Decimal min_ratio = Decimal::from_double(rule.min_gb_per_vcpu);
  const Decimal max_ratio = Decimal::from_double(rule.max_gb_per_vcpu);
  const Decimal cpu_step = Decimal::from_double(rule.cpu_step);
  const Decimal mem_step = Decimal::from_double(rule.mem_step_mb);
  // Raise whichever side falls outside the band; each step can only move up,
  // so the loop terminates after a couple of passes.
  for (int guard = 0; guard < 64; ++guard) {
    const Decimal lo_mb = Decimal::product({cpu, min_ratio, mb_per_gb});
    const Decimal hi_mb = Decimal::product({cpu, max_ratio, mb_per_gb});
    if (mem_mb < lo_mb) {
      mem_mb = lo_mb.ceil_to_multiple(mem_step);
    } else if (mem_mb > hi_mb) {
      cpu = Decimal::quotient(mem_mb, Decimal::product({max_ratio, mb_per_gb})).ceil_to_multiple(cpu_step);
    } else {
      out.vcpus = cpu.to_double();
      out.memory_mb = mem_mb.to_double();
      return out;
    }
  }
  throw BillingError("ratio constraint could not be satisfied");
}

}  // namespace

Decimal memory_gb(double memory_mb) { return Decimal::quotient(Decimal::from_double(memory_mb), Decimal::from_int(1024)); }

ResourceAllocation normalize_allocation(const ResourceAllocation& requested, const PlatformBillingConfig& config) {
  require_nonnegative(requested.vcpus, "vcpus");
  require_nonnegative(requested.memory_mb, "memory_mb");
  for (const auto& [name, amount] : requested.extras) require_nonnegative(amount, name.c_str());

  return std::visit(
      [&](const auto& rule) -> ResourceAllocation {
        using T = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<T, Independent>) {
          return requested;
        } else if constexpr (std::is_same_v<T, CpuProportionalToMemory>) {
          ResourceAllocation out = requested;
          const double implied_mb = requested.vcpus * rule.mem_per_vcpu_mb;
          if (exceeds(implied_mb, requested.memory_mb)) out.memory_mb = implied_mb;
          const double vcpus = out.memory_mb / rule.mem_per_vcpu_mb;
          // Keep an already-consistent vcpu value bit-identical.
          if (std::abs(vcpus - requested.vcpus) > kRelTolerance * std::max(1.0, vcpus)) out.vcpus = vcpus;
          return out;
        } else if constexpr (std::is_same_v<T, FixedCombos>) {
          for (const auto& combo : rule.combos) {
            if (!exceeds(requested.memory_mb, combo.memory_mb) && !exceeds(requested.vcpus, combo.vcpus)) {
              ResourceAllocation out = requested;
              out.vcpus = combo.vcpus;
              out.memory_mb = combo.memory_mb;
              return out;
            }
          }
          throw BillingError("allocation exceeds platform maximum");
        } else {
          return normalize_ratio(requested, rule);
        }
      },
      config.knob_coupling);
}

Decimal round_billable_time(Decimal raw_ms, const PlatformBillingConfig& config) {
  if (!config.time_granularity_ms)
    throw BillingError("platform '" + config.name + "' has no documented time granularity");
  return max(raw_ms, config.time_min_cutoff_ms).ceil_to_multiple(*config.time_granularity_ms);
}

Decimal billable_time(Decimal raw_execution_ms, Decimal init_ms, const PlatformBillingConfig& config) {
  if (raw_execution_ms.is_negative() || init_ms.is_negative()) throw BillingError("durations must be >= 0");
  const Decimal t0 =
      config.billable_time_kind == BillableTimeKind::turnaround ? raw_execution_ms + init_ms : raw_execution_ms;
  return round_billable_time(t0, config);
}

double billable_time(double raw_execution_ms, double init_ms, const PlatformBillingConfig& config) {
  return billable_time(Decimal::from_double(raw_execution_ms), Decimal::from_double(init_ms), config).to_double();
}

Decimal record_billable_time(const InvocationRecord& record, const PlatformBillingConfig& config) {
  const Decimal exec_ms = Decimal::from_double(record.exec_duration_ms);
  const Decimal raw_ms = config.billable_time_kind == BillableTimeKind::cpu_time_only
                             ? Decimal::product({Decimal::from_double(record.cpu_usage_avg_vcpus), exec_ms})
                             : exec_ms;
  return billable_time(raw_ms, Decimal::from_double(record.init_duration_ms), config);
}

Decimal alloc_amount(const AllocResourceSpec& spec, const InvocationRecord& record) {
  const bool consumed = spec.metering == Metering::consumed;
  switch (spec.resource.kind()) {
    case ResourceId::Kind::vcpu:
      return Decimal::from_double(consumed ? record.cpu_usage_avg_vcpus : record.alloc.vcpus);
    case ResourceId::Kind::memory_gb:
      return memory_gb(consumed ? record.mem_usage_mb : record.alloc.memory_mb);
    case ResourceId::Kind::other: {
      const auto& source = consumed ? record.usage_extras : record.alloc.extras;
      auto it = source.find(spec.resource.name());
      return it == source.end() ? Decimal{} : Decimal::from_double(it->second);
    }
  }
  return Decimal{};
}

CostBreakdown compute_cost(const InvocationRecord& record, const PlatformBillingConfig& config) {
  require_nonnegative(record.exec_duration_ms, "exec_duration_ms");
  require_nonnegative(record.init_duration_ms, "init_duration_ms");
  require_nonnegative(record.cpu_usage_avg_vcpus, "cpu_usage_avg_vcpus");
  require_nonnegative(record.mem_usage_mb, "mem_usage_mb");
  require_nonnegative(record.alloc.vcpus, "vcpus");
  require_nonnegative(record.alloc.memory_mb, "memory_mb");

  auto priced = [&](const std::string& name) {
    const auto id = ResourceId::parse(name);
    if (!config.find_alloc(id) && !config.find_usage(id)) throw BillingError("unpriced resource: " + name);
  };
  for (const auto& [name, amount] : record.alloc.extras) {
    require_nonnegative(amount, name.c_str());
    priced(name);
  }
  for (const auto& [name, amount] : record.usage_extras) {
    require_nonnegative(amount, name.c_str());
    priced(name);
  }

  const Decimal exec_ms = Decimal::from_double(record.exec_duration_ms);
  const Decimal cpu_usage = Decimal::from_double(record.cpu_usage_avg_vcpus);

  CostBreakdown out;
  out.billable_time_ms = record_billable_time(record, config);

  for (const auto& spec : config.alloc_resources) {
    if (!spec.unit_price_usd_per_unit_second) throw BillingError("unpriced resource: " + spec.resource.name());
    const Decimal billed = alloc_amount(spec, record).ceil_to_multiple(spec.granularity);
    // Time is in ms, prices are per second.
    const Decimal usd = Decimal::product({billed, out.billable_time_ms, *spec.unit_price_usd_per_unit_second}, 1000);
    out.alloc_terms[spec.resource] = {billed, usd};
  }

  for (const auto& spec : config.usage_resources) {
    if (!spec.unit_price_usd_per_unit) throw BillingError("unpriced resource: " + spec.resource.name());
    Decimal billed;
    switch (spec.resource.kind()) {
      case ResourceId::Kind::vcpu:  // consumed vCPU-milliseconds
        billed = Decimal::product_ceil_to_multiple(cpu_usage, exec_ms, 1, spec.granularity);
        break;
      case ResourceId::Kind::memory_gb:  // consumed GB-seconds
        billed = Decimal::product_ceil_to_multiple(memory_gb(record.mem_usage_mb), exec_ms, 1000, spec.granularity);
        break;
      case ResourceId::Kind::other: {
        auto it = record.usage_extras.find(spec.resource.name());
        const Decimal amount = it == record.usage_extras.end() ? Decimal{} : Decimal::from_double(it->second);
        billed = amount.ceil_to_multiple(spec.granularity);
        break;
      }
    }
    out.usage_terms[spec.resource] = {billed, Decimal::product({billed, *spec.unit_price_usd_per_unit})};
  }

  if (!config.invocation_fee_usd) throw BillingError("unpriced resource: invocation fee");
  out.fee_usd = *config.invocation_fee_usd;

  out.total_usd = out.fee_usd;
  for (const auto& [id, term] : out.alloc_terms) out.total_usd += term.usd;
  for (const auto& [id, term] : out.usage_terms) out.total_usd += term.usd;
  return out;
}

Decimal fee_equivalent_walltime(const PlatformBillingConfig& config, const ResourceAllocation& allocation) {
  if (!config.invocation_fee_usd) throw BillingError("unpriced resource: invocation fee");
  const Decimal fee = *config.invocation_fee_usd;
  if (fee.is_zero()) return Decimal{};

  InvocationRecord probe;
  probe.alloc = allocation;
  // Consumed-metered terms have no allocation of their own; the granted
  // amount stands in for them.
  probe.cpu_usage_avg_vcpus = allocation.vcpus;
  probe.mem_usage_mb = allocation.memory_mb;
  probe.usage_extras = allocation.extras;

  detail::Wide per_second_raw = 0;  // sum of billed * price, scale 1e24
  for (const auto& spec : config.alloc_resources) {
    if (!spec.unit_price_usd_per_unit_second) throw BillingError("unpriced resource: " + spec.resource.name());
    const Decimal billed = alloc_amount(spec, probe).ceil_to_multiple(spec.granularity);
    per_second_raw += detail::widen(billed) * detail::widen(*spec.unit_price_usd_per_unit_second);
  }
  if (per_second_raw <= 0) throw BillingError("fee has no time equivalent");
  // ms = 1000 * fee / per_second
  const detail::Wide numerator = detail::widen(fee) * 1000 * detail::pow10(2 * Decimal::kScale);
  return detail::narrow(detail::round_div(numerator, per_second_raw));
}

}  // namespace faascost::billing
