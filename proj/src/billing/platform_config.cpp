#include "faascost/billing/platform_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef FAASCOST_BUNDLED_CONFIG_DIR
#define FAASCOST_BUNDLED_CONFIG_DIR "configs/platforms"
#endif

namespace faascost::billing {

using nlohmann::json;

ResourceId ResourceId::other(std::string name) {
  if (name.empty()) throw ConfigError("resource name must not be empty");
  if (name == "vcpu" || name == "memory_gb") return parse(name);
  return ResourceId(Kind::other, std::move(name));
}

ResourceId ResourceId::parse(std::string_view name) {
  if (name == "vcpu") return vcpu();
  if (name == "memory_gb") return memory_gb();
  return other(std::string(name));
}

const AllocResourceSpec* PlatformBillingConfig::find_alloc(const ResourceId& id) const {
  auto it = std::find_if(alloc_resources.begin(), alloc_resources.end(),
                         [&](const AllocResourceSpec& s) { return s.resource == id; });
  return it == alloc_resources.end() ? nullptr : &*it;
}

const UsageResourceSpec* PlatformBillingConfig::find_usage(const ResourceId& id) const {
  auto it = std::find_if(usage_resources.begin(), usage_resources.end(),
                         [&](const UsageResourceSpec& s) { return s.resource == id; });
  return it == usage_resources.end() ? nullptr : &*it;
}

std::string_view to_string(BillableTimeKind kind) {
  switch (kind) {
    case BillableTimeKind::execution:
      return "execution";
    case BillableTimeKind::turnaround:
      return "turnaround";
    case BillableTimeKind::cpu_time_only:
      return "cpu_time_only";
  }
  return "execution";
}

std::string_view to_string(Metering metering) {
  return metering == Metering::allocated ? "allocated" : "consumed";
}

void validate(const PlatformBillingConfig& c) {
  const std::string where = "platform '" + c.name + "': ";
  if (c.name.empty()) throw ConfigError("platform config needs a name");
  if (c.time_granularity_ms && *c.time_granularity_ms <= Decimal{})
    throw ConfigError(where + "time_granularity_ms must be positive");
  if (c.time_min_cutoff_ms.is_negative()) throw ConfigError(where + "time_min_cutoff_ms must be >= 0");
  if (c.invocation_fee_usd && c.invocation_fee_usd->is_negative())
    throw ConfigError(where + "invocation_fee_usd must be >= 0");

  std::vector<std::string> seen;
  auto check_unique = [&](const ResourceId& id) {
    if (std::find(seen.begin(), seen.end(), id.name()) != seen.end())
      throw ConfigError(where + "resource '" + id.name() + "' listed more than once");
    seen.push_back(id.name());
  };
  for (const auto& r : c.alloc_resources) {
    check_unique(r.resource);
    if (r.granularity <= Decimal{}) throw ConfigError(where + "granularity of '" + r.resource.name() + "' must be positive");
    if (r.unit_price_usd_per_unit_second && r.unit_price_usd_per_unit_second->is_negative())
      throw ConfigError(where + "unit price of '" + r.resource.name() + "' must be >= 0");
  }
  for (const auto& r : c.usage_resources) {
    check_unique(r.resource);
    if (r.granularity <= Decimal{}) throw ConfigError(where + "granularity of '" + r.resource.name() + "' must be positive");
    if (r.unit_price_usd_per_unit && r.unit_price_usd_per_unit->is_negative())
      throw ConfigError(where + "unit price of '" + r.resource.name() + "' must be >= 0");
  }

  if (const auto* fixed = std::get_if<FixedCombos>(&c.knob_coupling)) {
    if (fixed->combos.empty()) throw ConfigError(where + "fixed_combos must not be empty");
    for (std::size_t i = 0; i < fixed->combos.size(); ++i) {
      const auto& combo = fixed->combos[i];
      if (combo.vcpus < 0 || combo.memory_mb <= 0) throw ConfigError(where + "fixed combo amounts must be positive");
      if (i > 0 && combo.memory_mb <= fixed->combos[i - 1].memory_mb)
        throw ConfigError(where + "fixed_combos must be strictly increasing in memory");
    }
  } else if (const auto* prop = std::get_if<CpuProportionalToMemory>(&c.knob_coupling)) {
    if (prop->mem_per_vcpu_mb <= 0) throw ConfigError(where + "mem_per_vcpu_mb must be positive");
  } else if (const auto* ratio = std::get_if<RatioConstrained>(&c.knob_coupling)) {
    if (ratio->min_gb_per_vcpu <= 0 || ratio->max_gb_per_vcpu < ratio->min_gb_per_vcpu)
      throw ConfigError(where + "ratio bounds must satisfy 0 < min <= max");
    if (ratio->cpu_step <= 0 || ratio->mem_step_mb <= 0) throw ConfigError(where + "ratio steps must be positive");
  }
}

namespace {

Decimal decimal_from_json(const json& j, const std::string& field) {
  if (j.is_string()) return Decimal::parse(j.get<std::string>());
  if (j.is_number_integer()) return Decimal::from_int(j.get<std::int64_t>());
  if (j.is_number()) return Decimal::from_double(j.get<double>());
  throw ConfigError("field '" + field + "' must be a decimal string or number");
}

std::optional<Decimal> optional_decimal(const json& obj, const std::string& field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return decimal_from_json(*it, field);
}

json decimal_to_json(const std::optional<Decimal>& d) { return d ? json(d->to_string()) : json(nullptr); }

BillableTimeKind parse_time_kind(const std::string& s) {
  if (s == "execution") return BillableTimeKind::execution;
  if (s == "turnaround") return BillableTimeKind::turnaround;
  if (s == "cpu_time_only") return BillableTimeKind::cpu_time_only;
  throw ConfigError("unknown billable_time '" + s + "'");
}

Metering parse_metering(const std::string& s) {
  if (s == "allocated") return Metering::allocated;
  if (s == "consumed") return Metering::consumed;
  throw ConfigError("unknown metering '" + s + "'");
}

KnobCoupling parse_coupling(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "independent") return Independent{};
  if (kind == "cpu_proportional_to_memory") return CpuProportionalToMemory{j.at("mem_per_vcpu_mb").get<double>()};
  if (kind == "fixed_combos") {
    FixedCombos fixed;
    for (const auto& c : j.at("combos")) fixed.combos.push_back({c.at("vcpus").get<double>(), c.at("memory_mb").get<double>()});
    return fixed;
  }
  if (kind == "ratio_constrained") {
    RatioConstrained r;
    r.min_gb_per_vcpu = j.at("min_gb_per_vcpu").get<double>();
    r.max_gb_per_vcpu = j.at("max_gb_per_vcpu").get<double>();
    r.cpu_step = j.at("cpu_step").get<double>();
    r.mem_step_mb = j.at("mem_step_mb").get<double>();
    return r;
  }
  throw ConfigError("unknown knob_coupling kind '" + kind + "'");
}

json coupling_to_json(const KnobCoupling& coupling) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Independent>) {
          return {{"kind", "independent"}};
        } else if constexpr (std::is_same_v<T, CpuProportionalToMemory>) {
          return {{"kind", "cpu_proportional_to_memory"}, {"mem_per_vcpu_mb", c.mem_per_vcpu_mb}};
        } else if constexpr (std::is_same_v<T, FixedCombos>) {
          json combos = json::array();
          for (const auto& combo : c.combos) combos.push_back({{"vcpus", combo.vcpus}, {"memory_mb", combo.memory_mb}});
          return {{"kind", "fixed_combos"}, {"combos", combos}};
        } else {
          return {{"kind", "ratio_constrained"},
                  {"min_gb_per_vcpu", c.min_gb_per_vcpu},
                  {"max_gb_per_vcpu", c.max_gb_per_vcpu},
                  {"cpu_step", c.cpu_step},
                  {"mem_step_mb", c.mem_step_mb}};
        }
      },
      coupling);
}

}  // namespace

PlatformBillingConfig parse_platform_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("platform config is not valid JSON: ") + e.what());
  }

  PlatformBillingConfig c;
  try {
    c.name = j.at("name").get<std::string>();
    c.billable_time_kind = parse_time_kind(j.at("billable_time").get<std::string>());
    c.time_granularity_ms = optional_decimal(j, "time_granularity_ms");
    c.time_min_cutoff_ms = optional_decimal(j, "time_min_cutoff_ms").value_or(Decimal{});
    c.invocation_fee_usd = optional_decimal(j, "invocation_fee_usd");
    for (const auto& r : j.value("alloc_resources", json::array())) {
      AllocResourceSpec spec;
      spec.resource = ResourceId::parse(r.at("resource").get<std::string>());
      spec.granularity = decimal_from_json(r.at("granularity"), "granularity");
      spec.unit_price_usd_per_unit_second = optional_decimal(r, "unit_price_usd_per_unit_second");
      spec.metering = parse_metering(r.value("metering", std::string("allocated")));
      c.alloc_resources.push_back(std::move(spec));
    }
    for (const auto& r : j.value("usage_resources", json::array())) {
      UsageResourceSpec spec;
      spec.resource = ResourceId::parse(r.at("resource").get<std::string>());
      spec.granularity = decimal_from_json(r.at("granularity"), "granularity");
      spec.unit_price_usd_per_unit = optional_decimal(r, "unit_price_usd_per_unit");
      c.usage_resources.push_back(std::move(spec));
    }
    if (j.contains("knob_coupling")) c.knob_coupling = parse_coupling(j.at("knob_coupling"));
    c.notes = j.value("notes", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("platform config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("platform config: ") + e.what());
  }
  validate(c);
  return c;
}

PlatformBillingConfig load_platform_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open platform config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_platform_config(ss.str());
}

std::string to_json(const PlatformBillingConfig& c) {
  json j;
  j["name"] = c.name;
  j["billable_time"] = std::string(to_string(c.billable_time_kind));
  j["time_granularity_ms"] = decimal_to_json(c.time_granularity_ms);
  j["time_min_cutoff_ms"] = c.time_min_cutoff_ms.to_string();
  j["alloc_resources"] = json::array();
  for (const auto& r : c.alloc_resources) {
    j["alloc_resources"].push_back({{"resource", r.resource.name()},
                                    {"granularity", r.granularity.to_string()},
                                    {"unit_price_usd_per_unit_second", decimal_to_json(r.unit_price_usd_per_unit_second)},
                                    {"metering", std::string(to_string(r.metering))}});
  }
  j["usage_resources"] = json::array();
  for (const auto& r : c.usage_resources) {
    j["usage_resources"].push_back({{"resource", r.resource.name()},
                                    {"granularity", r.granularity.to_string()},
                                    {"unit_price_usd_per_unit", decimal_to_json(r.unit_price_usd_per_unit)}});
  }
  j["invocation_fee_usd"] = decimal_to_json(c.invocation_fee_usd);
  j["knob_coupling"] = coupling_to_json(c.knob_coupling);
  if (!c.notes.empty()) j["notes"] = c.notes;
  return j.dump(2);
}

std::filesystem::path bundled_config_dir() { return std::filesystem::path(FAASCOST_BUNDLED_CONFIG_DIR); }

std::filesystem::path resolve_platform_path(std::string_view name_or_path,
                                            const std::optional<std::filesystem::path>& explicit_dir) {
  const std::filesystem::path direct(name_or_path);
  if (direct.has_extension() && std::filesystem::exists(direct)) return direct;

  std::vector<std::filesystem::path> dirs;
  if (explicit_dir) dirs.push_back(*explicit_dir);
  if (const char* env = std::getenv("FAASCOST_CONFIG_DIR"); env && *env) dirs.emplace_back(env);
  dirs.push_back(bundled_config_dir());

  const std::string file = std::string(name_or_path) + (direct.has_extension() ? "" : ".json");
  for (const auto& dir : dirs) {
    auto candidate = dir / file;
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw ConfigError("unknown platform '" + std::string(name_or_path) + "'");
}

std::vector<std::string> list_platforms(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  if (!std::filesystem::is_directory(dir)) return names;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace faascost::billing
