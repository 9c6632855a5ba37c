#include <cstdio>
#include <cmath>
#include <exception>
#include <fstream>
#include <thread>

#include "faascost/billing/billing.hpp"
#include "faascost/trace/analysis.hpp"
#include "json.hpp"
#include "text.hpp"

namespace faascost::trace {

namespace {

using nlohmann::json;

std::uint64_t chunk_seed(std::uint64_t seed, std::uint64_t chunk) {
  std::uint64_t z = seed ^ (0xd1b54a32d192ed03ULL * (chunk + 7));
  z = (z ^ (z >> 31)) * 0x7fb5d329728ea185ULL;
  return z ^ (z >> 27);
}

// Every accumulator for one slice of the trace.
struct Partial {
  Partial(const AnalysisOptions& o, std::uint64_t seed) : correlation(seed, o.reservoir_cap, o.sketch_k),
                                                          rounding(o.rounding_policies, seed, o.sketch_k) {
    if (o.inflation)
      for (std::size_t i = 0; i < o.platforms.size(); ++i)
        inflation.emplace_back(o.platforms[i], o.mapping, seed + 1000 * (i + 1), o.sketch_k);
    if (o.cold_start && o.cold_start_config)
      cold_start.emplace(*o.cold_start_config, o.session_gap_ms, seed + 7, o.sketch_k);
  }

  void add(const InvocationRecord& r, std::uint64_t seq, const AnalysisOptions& o) {
    for (auto& acc : inflation) acc.add(r);
    if (o.correlation) correlation.add(r);
    if (cold_start) cold_start->add(r, seq);
    if (o.rounding) rounding.add(r);
  }

  void merge(const Partial& other) {
    for (std::size_t i = 0; i < inflation.size(); ++i) inflation[i].merge(other.inflation[i]);
    correlation.merge(other.correlation);
    if (cold_start) cold_start->merge(*other.cold_start);
    rounding.merge(other.rounding);
  }

  std::vector<InflationAccumulator> inflation;
  CorrelationAccumulator correlation;
  std::optional<ColdStartAccumulator> cold_start;
  RoundingAccumulator rounding;
};

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

const double kSummaryQuantiles[] = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};

json stats_json(const StreamStats& s) {
  json out{{"count", s.count}, {"sum", num(s.sum.value())}, {"mean", num(s.mean())}};
  if (s.sketch.empty()) {
    out["min"] = nullptr;
    out["max"] = nullptr;
    out["quantiles"] = json::object();
    return out;
  }
  out["min"] = num(s.sketch.min());
  out["max"] = num(s.sketch.max());
  json q = json::object();
  for (double p : kSummaryQuantiles) {
    char key[16];
    std::snprintf(key, sizeof key, "p%g", p * 100);
    q[key] = num(s.sketch.quantile(p));
  }
  out["quantiles"] = q;
  return out;
}

std::string cell(double v) { return std::isfinite(v) ? detail::shortest(v) : std::string(); }

// Percentile grid 0, 1, ..., 100 used by the CDF tables.
template <typename F>
void for_each_percentile(F&& f) {
  for (int i = 0; i <= 100; ++i) f(i / 100.0);
}

double q_or_nan(const StreamStats& s, double q) { return s.sketch.empty() ? NAN : s.sketch.quantile(q); }

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

TraceReport analyze_trace(TraceReader& reader, const AnalysisOptions& options) {
  if (options.chunk_size == 0) throw AnalysisError("chunk size must be positive");
  const unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());

  Partial total(options, chunk_seed(options.seed, ~0ULL));
  std::uint64_t seq = 0;
  std::uint64_t chunk_index = 0;
  bool done = false;
  while (!done) {
    std::vector<std::vector<InvocationRecord>> batch;
    std::vector<std::uint64_t> first_seq;
    while (batch.size() < threads) {
      std::vector<InvocationRecord> chunk;
      chunk.reserve(options.chunk_size);
      while (chunk.size() < options.chunk_size) {
        auto r = reader.next();
        if (!r) {
          done = true;
          break;
        }
        chunk.push_back(std::move(*r));
      }
      if (chunk.empty()) break;
      first_seq.push_back(seq);
      seq += chunk.size();
      batch.push_back(std::move(chunk));
      if (done) break;
    }
    if (batch.empty()) break;

    std::vector<std::optional<Partial>> partials(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
    auto work = [&](std::size_t i) {
      try {
        Partial p(options, chunk_seed(options.seed, chunk_index + i));
        for (std::size_t j = 0; j < batch[i].size(); ++j) p.add(batch[i][j], first_seq[i] + j, options);
        partials[i].emplace(std::move(p));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    };
    if (batch.size() == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < batch.size(); ++i) pool.emplace_back(work, i);
      for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      total.merge(*partials[i]);
    }
    chunk_index += batch.size();
  }

  TraceReport report;
  report.ingest = reader.counters();
  report.memory_semantics = reader.schema().memory_semantics;
  if (report.ingest.records == 0) throw AnalysisError("no records");
  for (const auto& acc : total.inflation) report.inflation.push_back(acc.report());
  if (options.correlation) {
    try {
      report.correlation = total.correlation.report();
    } catch (const AnalysisError& e) {
      report.correlation_error = e.what();
    }
  }
  if (total.cold_start) {
    report.cold_start = total.cold_start->report();
    report.cold_start_platform = options.cold_start_config->name;
  }
  if (options.rounding) report.rounding = total.rounding.report();
  return report;
}

std::string report_to_json(const TraceReport& report, const AnalysisOptions& options) {
  json doc;
  doc["seed"] = options.seed;
  doc["ingest"] = {{"rows", report.ingest.rows},
                   {"records", report.ingest.records},
                   {"malformed", report.ingest.malformed},
                   {"filtered_zero_cpu", report.ingest.filtered_zero_cpu}};
  doc["memory_semantics"] = to_string(report.memory_semantics);

  json infl = json::array();
  for (const auto& r : report.inflation) {
    infl.push_back({{"platform", r.platform},
                    {"mapping", to_string(r.mapping)},
                    {"records", r.records},
                    {"unmappable", r.unmappable},
                    {"billable_vcpu_s", stats_json(r.billable_vcpu_s)},
                    {"billable_gb_s", stats_json(r.billable_gb_s)},
                    {"actual_vcpu_s", stats_json(r.actual_vcpu_s)},
                    {"actual_gb_s", stats_json(r.actual_gb_s)},
                    {"mean_inflation_cpu", num(r.mean_inflation_cpu)},
                    {"mean_inflation_mem", num(r.mean_inflation_mem)},
                    {"flags", r.flags}});
  }
  doc["inflation"] = infl;

  if (report.correlation) {
    const auto& c = *report.correlation;
    doc["correlation"] = {{"n", c.n},
                          {"pearson_r", num(c.pearson_r)},
                          {"sample_size", c.sample.size()},
                          {"cpu_utilization", stats_json(c.cpu_util)},
                          {"memory_utilization", stats_json(c.mem_util)},
                          {"fraction_cpu_below_half", c.fraction_cpu_below_half},
                          {"fraction_memory_below_half", c.fraction_mem_below_half}};
  } else if (!report.correlation_error.empty()) {
    doc["correlation"] = {{"error", report.correlation_error}};
  }

  if (report.cold_start) {
    const auto& c = *report.cold_start;
    doc["cold_start"] = {{"platform", report.cold_start_platform},
                         {"time_basis", "execution"},
                         {"groups", c.groups},
                         {"sessionized_groups", c.sessionized},
                         {"session_gap_ms", options.session_gap_ms},
                         {"cold_starts", c.cold_starts},
                         {"zero_init_flagged", c.zero_init},
                         {"extra_cold_records", c.extra_cold_records},
                         {"fraction_nonpositive", c.fraction_nonpositive},
                         {"fraction_nonpositive_cpu", c.fraction_nonpositive_cpu},
                         {"fraction_nonpositive_mem", c.fraction_nonpositive_mem},
                         {"diff_vcpu_s", stats_json(c.diff_vcpu_s)},
                         {"diff_gb_s", stats_json(c.diff_gb_s)},
                         {"total_subsequent_vcpu_s", num(c.total_subsequent_vcpu_s)},
                         {"total_subsequent_gb_s", num(c.total_subsequent_gb_s)}};
  }

  json rounding = json::array();
  for (const auto& s : report.rounding) {
    json entry{{"policy", s.policy.name},
               {"granularity_ms", s.policy.granularity_ms.to_string()},
               {"cutoff_ms", s.policy.cutoff_ms.to_string()},
               {"records", s.records},
               {"excluded_short", s.excluded_short},
               {"time_residual_ms", stats_json(s.time_residual_ms)}};
    if (s.policy.memory_granularity_mb) {
      entry["memory_granularity_mb"] = s.policy.memory_granularity_mb->to_string();
      entry["memory_basis"] = s.policy.memory_basis == MemoryBasis::usage ? "usage" : "allocation";
      entry["mem_residual_gb_s"] = stats_json(s.mem_residual_gb_s);
    }
    rounding.push_back(entry);
  }
  doc["rounding"] = rounding;
  return doc.dump(2) + "\n";
}

void write_figure_tables(const TraceReport& report, const AnalysisOptions& options, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    auto out = open_out(dir / "fig2.csv");
    out << "series,metric,quantile,value\n";
    auto emit = [&](const std::string& series, const char* metric, const StreamStats& s) {
      for_each_percentile([&](double q) {
        out << series << ',' << metric << ',' << cell(q) << ',' << cell(q_or_nan(s, q)) << '\n';
      });
    };
    if (!report.inflation.empty()) {
      emit("actual", "vcpu_s", report.inflation.front().actual_vcpu_s);
      emit("actual", "gb_s", report.inflation.front().actual_gb_s);
    }
    for (const auto& r : report.inflation) {
      emit(r.platform, "vcpu_s", r.billable_vcpu_s);
      emit(r.platform, "gb_s", r.billable_gb_s);
    }
  }

  {
    auto out = open_out(dir / "fig3.csv");
    out << "cpu_utilization,memory_utilization\n";
    if (report.correlation)
      for (const auto& [x, y] : report.correlation->sample) out << cell(x) << ',' << cell(y) << '\n';
    auto cdf = open_out(dir / "fig3_cdf.csv");
    cdf << "series,quantile,value\n";
    if (report.correlation) {
      for_each_percentile([&](double q) {
        cdf << "cpu_utilization," << cell(q) << ',' << cell(q_or_nan(report.correlation->cpu_util, q)) << '\n';
      });
      for_each_percentile([&](double q) {
        cdf << "memory_utilization," << cell(q) << ',' << cell(q_or_nan(report.correlation->mem_util, q)) << '\n';
      });
    }
  }

  {
    auto out = open_out(dir / "fig4.csv");
    out << "quantile,diff_vcpu_s,diff_gb_s\n";
    if (report.cold_start)
      for_each_percentile([&](double q) {
        out << cell(q) << ',' << cell(q_or_nan(report.cold_start->diff_vcpu_s, q)) << ','
            << cell(q_or_nan(report.cold_start->diff_gb_s, q)) << '\n';
      });
  }

  {
    auto out = open_out(dir / "fig5.csv");
    out << "policy,quantile,time_residual_ms,mem_residual_gb_s\n";
    for (const auto& s : report.rounding)
      for_each_percentile([&](double q) {
        out << s.policy.name << ',' << cell(q) << ',' << cell(q_or_nan(s.time_residual_ms, q)) << ','
            << cell(q_or_nan(s.mem_residual_gb_s, q)) << '\n';
      });
  }

  {
    auto out = open_out(dir / "fig5_fee.csv");
    out << "platform,vcpus,memory_mb,fee_equivalent_ms\n";
    for (const auto& cfg : options.platforms) {
      for (double mb : {128.0, 256.0, 512.0, 1024.0, 1769.0, 2048.0, 4096.0}) {
        try {
          const auto alloc = billing::normalize_allocation({mb / 1769.0, mb, {}}, cfg);
          const auto ms = billing::fee_equivalent_walltime(cfg, alloc);
          out << cfg.name << ',' << cell(alloc.vcpus) << ',' << cell(alloc.memory_mb) << ',' << ms.to_string() << '\n';
        } catch (const billing::BillingError&) {
          // unpriced platform or allocation it cannot host
        }
      }
    }
  }
}

}  // namespace faascost::trace
