// faascost: billing, trace analytics, bandwidth-control simulation and scheduler profiling.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "faascost/billing/billing.hpp"
#include "faascost/profiler/analyze.hpp"
#include "faascost/profiler/probe.hpp"
#include "faascost/sched/bandwidth.hpp"
#include "faascost/trace/analysis.hpp"
#include "faascost/trace/ingest.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "text.hpp"

#ifndef FAASCOST_VERSION
#define FAASCOST_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace faascost::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format;
  std::string config_dir;
  std::vector<std::string> argv;
};

// Collects what a run read and wrote; flushed as run.json when --out-dir is set.
class Run {
 public:
  Run(const Globals& g, std::string subcommand) : g_(g), started_(std::chrono::steady_clock::now()) {
    m_.subcommand = std::move(subcommand);
    m_.arguments = g.argv;
    m_.seed = g.seed;
    m_.version = FAASCOST_VERSION;
    if (!g.out_dir.empty()) fs::create_directories(g.out_dir);
  }

  bool to_dir() const { return !g_.out_dir.empty(); }
  void config(const fs::path& p) {
    auto s = fs::absolute(p).lexically_normal().string();
    if (std::find(m_.config_paths.begin(), m_.config_paths.end(), s) == m_.config_paths.end())
      m_.config_paths.push_back(std::move(s));
  }
  void input(const fs::path& p) { m_.inputs.push_back({fs::absolute(p).lexically_normal().string(), sha256_file(p)}); }

  // Writes `text` to <out-dir>/<name>, or to stdout without an output directory.
  void emit(const std::string& name, const std::string& text) {
    if (!to_dir()) {
      std::cout << text;
      return;
    }
    write_file(fs::path(g_.out_dir) / name, text);
  }

  void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
    m_.outputs.push_back(path.filename().string());
  }

  void output(const std::string& name) { m_.outputs.push_back(name); }

  void finish() {
    if (!to_dir()) return;
    m_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    std::sort(m_.outputs.begin(), m_.outputs.end());
    m_.outputs.erase(std::unique(m_.outputs.begin(), m_.outputs.end()), m_.outputs.end());
    write_manifest(g_.out_dir, m_);
  }

 private:
  const Globals& g_;
  RunManifest m_;
  std::chrono::steady_clock::time_point started_;
};

std::optional<fs::path> explicit_config_dir(const Globals& g) {
  if (g.config_dir.empty()) return std::nullopt;
  return fs::path(g.config_dir);
}

std::vector<fs::path> config_dirs(const Globals& g) {
  std::vector<fs::path> dirs;
  if (auto d = explicit_config_dir(g)) dirs.push_back(*d);
  if (const char* env = std::getenv("FAASCOST_CONFIG_DIR"); env && *env) dirs.emplace_back(env);
  dirs.push_back(billing::bundled_config_dir());
  return dirs;
}

// Exact name or path first; otherwise a unique prefix, where "aws" picks aws-lambda
// over aws-lambda-arm because the shorter name prefixes every other match.
fs::path resolve_platform(const Globals& g, const std::string& name) {
  try {
    return billing::resolve_platform_path(name, explicit_config_dir(g));
  } catch (const billing::ConfigError&) {
  }
  for (const auto& dir : config_dirs(g)) {
    std::vector<std::string> hits;
    for (const auto& p : billing::list_platforms(dir))
      if (p.rfind(name, 0) == 0) hits.push_back(p);
    if (hits.empty()) continue;
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    const bool covers = std::all_of(hits.begin(), hits.end(), [&](const auto& h) { return h.rfind(hits[0], 0) == 0; });
    if (!covers) throw UsageError("platform '" + name + "' is ambiguous");
    return dir / (hits[0] + ".json");
  }
  throw UsageError("unknown platform '" + name + "'");
}

billing::PlatformBillingConfig load_platform(const Globals& g, Run& run, const std::string& name) {
  const auto path = resolve_platform(g, name);
  run.config(path);
  return billing::load_platform_config(path);
}

// A schema argument is a file path, the built-in "canonical", or a name found beside the
// platform configs in a sibling schemas/ directory.
trace::SchemaMap load_schema(const Globals& g, Run& run, const std::string& arg) {
  const fs::path direct(arg);
  if (direct.has_extension() && fs::exists(direct)) {
    run.config(direct);
    return trace::load_schema_map(direct);
  }
  for (const auto& dir : config_dirs(g)) {
    auto d = fs::absolute(dir).lexically_normal();
    if (!d.has_filename()) d = d.parent_path();
    const auto cand = d.parent_path() / "schemas" / (arg + ".json");
    if (fs::exists(cand)) {
      run.config(cand);
      return trace::load_schema_map(cand);
    }
  }
  if (arg == "canonical") return trace::canonical_schema();
  throw UsageError("unknown schema '" + arg + "'");
}

std::string fmt(double v) { return detail::shortest(v); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// ---- bill ----

struct BillArgs {
  std::string platform;
  double exec_ms = 0.0;
  double init_ms = 0.0;
  std::optional<double> vcpus;
  std::optional<double> mem_mb;
  double cpu_usage = 0.0;
  double mem_usage_mb = 0.0;
  bool cold = false;
  std::string input;
  std::string schema = "canonical";
};

json breakdown_json(const billing::CostBreakdown& b, const ResourceAllocation& alloc, const std::string& platform) {
  auto terms = [](const std::map<billing::ResourceId, billing::CostTerm>& m) {
    json out = json::object();
    for (const auto& [id, t] : m)
      out[id.name()] = {{"billable_amount", t.billable_amount.to_string()}, {"usd", t.usd.to_string()}};
    return out;
  };
  return {{"platform", platform},
          {"allocation", {{"vcpus", alloc.vcpus}, {"memory_mb", alloc.memory_mb}}},
          {"billable_time_ms", b.billable_time_ms.to_string()},
          {"alloc_terms", terms(b.alloc_terms)},
          {"usage_terms", terms(b.usage_terms)},
          {"fee_usd", b.fee_usd.to_string()},
          {"total_usd", b.total_usd.to_string()}};
}

struct BillColumns {
  std::vector<billing::ResourceId> alloc;
  std::vector<billing::ResourceId> usage;

  explicit BillColumns(const billing::PlatformBillingConfig& c) {
    for (const auto& s : c.alloc_resources) alloc.push_back(s.resource);
    for (const auto& s : c.usage_resources) usage.push_back(s.resource);
  }

  std::string header(const std::string& lead) const {
    std::string h = lead + ",billable_time_ms";
    for (const auto& r : alloc) h += ",alloc_" + r.name() + "_usd";
    for (const auto& r : usage) h += ",usage_" + r.name() + "_usd";
    return h + ",fee_usd,total_usd\n";
  }

  std::string row(const std::string& lead, const billing::CostBreakdown& b) const {
    auto term = [](const std::map<billing::ResourceId, billing::CostTerm>& m, const billing::ResourceId& id) {
      const auto it = m.find(id);
      return it == m.end() ? std::string() : it->second.usd.to_string();
    };
    std::string line = lead + "," + b.billable_time_ms.to_string();
    for (const auto& r : alloc) line += "," + term(b.alloc_terms, r);
    for (const auto& r : usage) line += "," + term(b.usage_terms, r);
    return line + "," + b.fee_usd.to_string() + "," + b.total_usd.to_string() + "\n";
  }
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void cmd_bill(const Globals& g, const BillArgs& a) {
  Run run(g, "bill");
  const auto config = load_platform(g, run, a.platform);

  if (a.input.empty()) {
    InvocationRecord r;
    r.function_id = "cli";
    r.exec_duration_ms = a.exec_ms;
    r.init_duration_ms = a.init_ms;
    r.is_cold_start = a.cold || a.init_ms > 0.0;
    r.alloc.vcpus = a.vcpus.value_or(0.0);
    r.alloc.memory_mb = a.mem_mb.value_or(0.0);
    r.cpu_usage_avg_vcpus = a.cpu_usage;
    r.mem_usage_mb = a.mem_usage_mb;
    r.alloc = billing::normalize_allocation(r.alloc, config);
    const auto b = billing::compute_cost(r, config);
    if (g.format == "csv") {
      const BillColumns cols(config);
      run.emit("bill.csv", cols.header("platform") + cols.row(csv_field(config.name), b));
    } else {
      run.emit("bill.json", breakdown_json(b, r.alloc, config.name).dump(2) + "\n");
    }
    run.finish();
    return;
  }

  run.input(a.input);
  auto schema = load_schema(g, run, a.schema);
  auto stream = trace::open_trace(a.input);
  trace::TraceReader reader(*stream, std::move(schema));
  const BillColumns cols(config);
  std::string csv = cols.header("function_id,instance_id");
  json docs = json::array();
  std::uint64_t n = 0;
  while (auto rec = reader.next()) {
    ++n;
    auto r = *rec;
    try {
      r.alloc = billing::normalize_allocation(r.alloc, config);
    } catch (const std::exception& e) {
      throw std::runtime_error("record " + std::to_string(n) + ": " + e.what());
    }
    const auto b = billing::compute_cost(r, config);
    if (g.format == "json")
      docs.push_back(breakdown_json(b, r.alloc, config.name));
    else
      csv += cols.row(csv_field(r.function_id) + "," + csv_field(r.instance_id), b);
  }
  if (reader.counters().malformed > 0)
    std::cerr << "faascost: warning: skipped " << reader.counters().malformed << " malformed rows\n";
  if (g.format == "json")
    run.emit("bill.json", docs.dump(2) + "\n");
  else
    run.emit("bill.csv", csv);
  run.finish();
}

// ---- analyze ----

struct AnalyzeArgs {
  std::string trace_path;
  std::string schema = "canonical";
  std::string platforms = "aws-lambda,gcp-cloud-run,azure-functions-consumption,cloudflare-workers";
  std::string cold_start_platform = "aws-lambda";
  std::string mapping = "larger_of";
  std::vector<std::string> rounding;
  std::string analyses = "inflation,correlation,cold-start,rounding";
  double session_gap_ms = 900000.0;
  unsigned threads = 0;
};

void cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  if (g.out_dir.empty()) throw UsageError("analyze writes a report directory; pass --out-dir");
  Run run(g, "analyze");
  trace::AnalysisOptions o;
  o.seed = g.seed;
  o.mapping = trace::parse_mapping_rule(a.mapping);
  o.session_gap_ms = a.session_gap_ms;
  o.threads = a.threads;
  const auto selected = split_list(a.analyses);
  for (const auto& s : selected)
    if (s != "inflation" && s != "correlation" && s != "cold-start" && s != "rounding")
      throw UsageError("unknown analysis '" + s + "'");
  auto has = [&](const char* s) { return std::find(selected.begin(), selected.end(), s) != selected.end(); };
  o.inflation = has("inflation");
  o.correlation = has("correlation");
  o.cold_start = has("cold-start");
  o.rounding = has("rounding");
  if (o.inflation)
    for (const auto& p : split_list(a.platforms)) o.platforms.push_back(load_platform(g, run, p));
  if (o.cold_start) o.cold_start_config = load_platform(g, run, a.cold_start_platform);
  if (!a.rounding.empty()) {
    o.rounding_policies.clear();
    for (const auto& spec : a.rounding) o.rounding_policies.push_back(trace::parse_rounding_policy(spec));
  }

  run.input(a.trace_path);
  auto schema = load_schema(g, run, a.schema);
  auto stream = trace::open_trace(a.trace_path);
  trace::TraceReader reader(*stream, std::move(schema));
  const auto report = trace::analyze_trace(reader, o);
  run.emit("report.json", trace::report_to_json(report, o));
  trace::write_figure_tables(report, o, g.out_dir);
  for (const auto& entry : fs::directory_iterator(g.out_dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("fig", 0) == 0 && entry.path().extension() == ".csv") run.output(name);
  }
  run.finish();
}

// ---- simulate ----

struct SimulateArgs {
  double t_ms = 0.0;
  std::string periods = "20";
  std::size_t grid = 200;
  int hz = 250;
  std::string flavor = "cfs";
  std::string accounting = "lagged";
  double slice_ms = 5.0;
  double tick_phase_ms = 0.0;
  bool closed_form_only = false;
  std::string timeline_fractions;
};

json curve_json(double period_ms, const std::vector<sched::CurvePoint>& curve) {
  json pts = json::array();
  for (const auto& p : curve)
    pts.push_back({{"f", p.f},
                   {"quota_ms", p.quota_ms},
                   {"completion_ms", p.completion_ms},
                   {"ideal_ms", p.ideal_ms},
                   {"n_throttles", p.n_throttles}});
  return {{"period_ms", period_ms}, {"max_relative_deviation", sched::max_relative_deviation(curve)}, {"points", pts}};
}

void cmd_simulate(const Globals& g, const SimulateArgs& a) {
  Run run(g, "simulate");
  if (a.grid == 0) throw UsageError("--grid must be positive");
  const sched::TaskSpec task{a.t_ms};
  sched::BandwidthControlConfig base;
  base.tick_hz = a.hz;
  base.flavor = sched::parse_flavor(a.flavor);
  base.accounting = sched::parse_accounting(a.accounting);
  base.slice_ms = a.slice_ms;
  base.tick_phase_ms = a.tick_phase_ms;
  const auto fractions = sched::fraction_grid(a.grid);

  std::vector<double> periods;
  for (const auto& p : split_list(a.periods)) periods.push_back(std::stod(p));
  if (periods.empty()) throw UsageError("--p needs at least one period");

  std::string combined = "period_ms,f,quota_ms,completion_ms,ideal_ms,n_throttles\n";
  json combined_json = json::array();
  for (double p : periods) {
    const auto curve = a.closed_form_only ? sched::closed_form_curve(task, p, fractions)
                                          : sched::duration_curve(task, p, fractions, base);
    const auto tag = "p" + fmt(p);
    if (g.format == "json") {
      if (run.to_dir())
        run.emit("curve_" + tag + ".json", curve_json(p, curve).dump(2) + "\n");
      else
        combined_json.push_back(curve_json(p, curve));
    } else if (run.to_dir()) {
      std::ostringstream out;
      sched::write_curve_csv(out, curve);
      run.emit("curve_" + tag + ".csv", out.str());
    } else {
      for (const auto& pt : curve)
        combined += fmt(p) + "," + fmt(pt.f) + "," + fmt(pt.quota_ms) + "," + fmt(pt.completion_ms) + "," +
                    fmt(pt.ideal_ms) + "," + std::to_string(pt.n_throttles) + "\n";
    }

    for (const auto& fs_text : split_list(a.timeline_fractions)) {
      if (a.closed_form_only) throw UsageError("timelines need the simulator; drop --closed-form-only");
      if (!run.to_dir()) throw UsageError("timelines are written to files; pass --out-dir");
      const double f = std::stod(fs_text);
      auto cfg = base;
      cfg.period_ms = p;
      cfg.quota_ms = f * p;
      run.emit("timeline_" + tag + "_f" + fmt(f) + ".json", sched::timeline_to_json(sched::simulate(task, cfg)));
    }
  }
  if (!run.to_dir()) {
    if (g.format == "json")
      std::cout << combined_json.dump(2) << "\n";
    else
      std::cout << combined;
  }
  run.finish();
}

// ---- profile ----

struct ProfileArgs {
  double duration_ms = 10000.0;
  sched::Micros threshold_us = 500;
  std::string out;
  std::string in;
  std::optional<double> span_ms;
  // replay
  std::string timeline;
  double p_ms = 20.0;
  double q_ms = 1.45;
  int hz = 250;
  std::string flavor = "cfs";
  std::string accounting = "lagged";
  double slice_ms = 5.0;
  double tick_phase_ms = 0.0;
  std::optional<double> cpu_ms;
  sched::Micros step_us = 1;
  bool reference = false;
};

std::string events_csv(const std::vector<profiler::ThrottleEvent>& events) {
  std::ostringstream out;
  profiler::write_event_log(out, events);
  return out.str();
}

// Events go to --out when given, else <out-dir>/events.csv, else stdout.
void emit_events(Run& run, const ProfileArgs& a, const std::vector<profiler::ThrottleEvent>& events) {
  if (!a.out.empty())
    run.write_file(a.out, events_csv(events));
  else
    run.emit("events.csv", events_csv(events));
  if (run.to_dir()) run.emit("fingerprint.json", profiler::fingerprint_to_json(profiler::analyze(events, a.duration_ms)));
}

sched::ScheduleTimeline read_timeline(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const auto doc = json::parse(in);
  sched::ScheduleTimeline t;
  for (const auto& s : doc.at("segments")) {
    const auto state = s.at("state").get<std::string>();
    if (state != "running" && state != "throttled") throw std::runtime_error("unknown segment state '" + state + "'");
    t.segments.push_back({sched::to_micros(s.at("start_ms").get<double>()), sched::to_micros(s.at("end_ms").get<double>()),
                          state == "running" ? sched::SegmentState::running : sched::SegmentState::throttled});
  }
  t.completion_us = sched::to_micros(doc.at("completion_ms").get<double>());
  return t;
}

void cmd_profile_run(const Globals& g, const ProfileArgs& a) {
  Run run(g, "profile run");
  bool truncated = false;
  const auto events = profiler::run_probe({a.duration_ms, a.threshold_us}, &truncated);
  if (truncated) std::cerr << "faascost: warning: event buffer full; log truncated\n";
  emit_events(run, a, events);
  run.finish();
}

void cmd_profile_replay(const Globals& g, const ProfileArgs& a) {
  Run run(g, "profile replay");
  sched::ScheduleTimeline timeline;
  if (!a.timeline.empty()) {
    run.input(a.timeline);
    timeline = read_timeline(a.timeline);
  } else {
    sched::BandwidthControlConfig cfg;
    cfg.period_ms = a.p_ms;
    cfg.quota_ms = a.q_ms;
    cfg.tick_hz = a.hz;
    cfg.flavor = sched::parse_flavor(a.flavor);
    cfg.accounting = sched::parse_accounting(a.accounting);
    cfg.slice_ms = a.slice_ms;
    cfg.tick_phase_ms = a.tick_phase_ms;
    timeline = sched::simulate({a.cpu_ms.value_or(a.duration_ms)}, cfg);
  }
  bool truncated = false;
  const auto events = profiler::replay_probe({a.duration_ms, a.threshold_us}, timeline, a.step_us, &truncated);
  if (truncated) std::cerr << "faascost: warning: event buffer full; log truncated\n";
  emit_events(run, a, events);
  run.finish();
}

std::vector<profiler::ThrottleEvent> read_events(Run& run, const std::string& path) {
  if (path.empty()) throw UsageError("--in is required");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  run.input(path);
  return profiler::read_event_log(in);
}

void cmd_profile_analyze(const Globals& g, const ProfileArgs& a, bool report) {
  Run run(g, report ? "profile report" : "profile analyze");
  const auto events = read_events(run, a.in);
  const auto fp = profiler::analyze(events, a.span_ms.value_or(a.duration_ms));
  if (report)
    run.emit("report.json", a.reference ? profiler::fingerprint_report(fp) : profiler::fingerprint_to_json(fp));
  else
    run.emit("fingerprint.json", profiler::fingerprint_to_json(fp));
  run.finish();
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Serverless billing, trace and CPU bandwidth-control toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", FAASCOST_VERSION);
  Globals g;
  for (int i = 1; i < argc; ++i) g.argv.emplace_back(argv[i]);
  app.add_option("--seed", g.seed, "Seed for sampled outputs")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Write outputs and run.json here instead of stdout");
  app.add_option("--format", g.format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--config-dir", g.config_dir, "Platform config directory searched before FAASCOST_CONFIG_DIR");

  BillArgs bill;
  auto* b = app.add_subcommand("bill", "Cost of one invocation, or of every record in a trace");
  b->add_option("--platform", bill.platform, "Platform name or config path")->required();
  b->add_option("--exec-ms", bill.exec_ms, "Execution time")->check(CLI::NonNegativeNumber);
  b->add_option("--init-ms", bill.init_ms, "Initialization time")->check(CLI::NonNegativeNumber);
  b->add_option("--vcpus", bill.vcpus, "Requested vCPUs")->check(CLI::NonNegativeNumber);
  b->add_option("--mem-mb", bill.mem_mb, "Requested memory")->check(CLI::NonNegativeNumber);
  b->add_option("--cpu-usage", bill.cpu_usage, "Mean vCPUs consumed")->check(CLI::NonNegativeNumber);
  b->add_option("--mem-usage-mb", bill.mem_usage_mb, "Memory consumed")->check(CLI::NonNegativeNumber);
  b->add_flag("--cold", bill.cold, "Mark the request as a cold start");
  b->add_option("--input", bill.input, "Trace file; bills every record")->check(CLI::ExistingFile);
  b->add_option("--schema", bill.schema, "Schema map for --input")->capture_default_str();

  AnalyzeArgs an;
  auto* a = app.add_subcommand("analyze", "Billable-resource analytics over an invocation trace");
  a->add_option("trace", an.trace_path, "Trace file (gzip accepted)")->required()->check(CLI::ExistingFile);
  a->add_option("--schema", an.schema, "Schema map name or path")->capture_default_str();
  a->add_option("--platforms", an.platforms, "Comma-separated platforms for inflation")->capture_default_str();
  a->add_option("--cold-start-platform", an.cold_start_platform)->capture_default_str();
  a->add_option("--mapping", an.mapping, "larger_of or memory_driven")->capture_default_str();
  a->add_option("--rounding", an.rounding, "name:granularity_ms[:cutoff_ms[:memory_granularity_mb]]");
  a->add_option("--analyses", an.analyses, "Subset of inflation,correlation,cold-start,rounding")->capture_default_str();
  a->add_option("--session-gap-ms", an.session_gap_ms)->capture_default_str()->check(CLI::PositiveNumber);
  a->add_option("--threads", an.threads, "Worker threads, 0 for all cores")->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Completion time versus CPU fraction under bandwidth control");
  s->add_option("--t", sim.t_ms, "Task CPU time in ms")->required()->check(CLI::PositiveNumber);
  s->add_option("--p", sim.periods, "Comma-separated periods in ms")->capture_default_str();
  s->add_option("--grid", sim.grid, "Number of fractions k/grid")->capture_default_str();
  s->add_option("--hz", sim.hz, "Scheduler tick rate")->capture_default_str();
  s->add_option("--flavor", sim.flavor)->check(CLI::IsMember({"cfs", "eevdf"}))->capture_default_str();
  s->add_option("--accounting", sim.accounting)->check(CLI::IsMember({"lagged", "exact"}))->capture_default_str();
  s->add_option("--slice-ms", sim.slice_ms)->capture_default_str();
  s->add_option("--tick-phase-ms", sim.tick_phase_ms)->capture_default_str();
  s->add_flag("--closed-form-only", sim.closed_form_only, "Evaluate the closed form instead of simulating");
  s->add_option("--timeline-f", sim.timeline_fractions, "Comma-separated fractions to dump timelines for");

  ProfileArgs prof;
  auto* p = app.add_subcommand("profile", "Throttle-gap probe and scheduler fingerprinting");
  p->require_subcommand(1);
  p->fallthrough();
  auto add_probe_opts = [&](CLI::App* c) {
    c->add_option("--duration-ms", prof.duration_ms, "Probe duration")->capture_default_str()->check(CLI::PositiveNumber);
    c->add_option("--threshold-us", prof.threshold_us, "Minimum clock jump recorded")->capture_default_str();
    c->add_option("--out", prof.out, "Event log path");
  };
  auto* pr = p->add_subcommand("run", "Busy-loop on this host and log clock gaps");
  add_probe_opts(pr);
  auto* pp = p->add_subcommand("replay", "Run the probe against a simulated timeline");
  add_probe_opts(pp);
  pp->add_option("--timeline", prof.timeline, "Timeline JSON written by simulate")->check(CLI::ExistingFile);
  pp->add_option("--p", prof.p_ms, "Period in ms")->capture_default_str();
  pp->add_option("--q", prof.q_ms, "Quota in ms")->capture_default_str();
  pp->add_option("--hz", prof.hz)->capture_default_str();
  pp->add_option("--flavor", prof.flavor)->check(CLI::IsMember({"cfs", "eevdf"}))->capture_default_str();
  pp->add_option("--accounting", prof.accounting)->check(CLI::IsMember({"lagged", "exact"}))->capture_default_str();
  pp->add_option("--slice-ms", prof.slice_ms)->capture_default_str();
  pp->add_option("--tick-phase-ms", prof.tick_phase_ms)->capture_default_str();
  pp->add_option("--cpu-ms", prof.cpu_ms, "Simulated task CPU time, default the probe duration");
  pp->add_option("--step-us", prof.step_us, "CPU cost of one clock read")->capture_default_str();
  auto* pa = p->add_subcommand("analyze", "Fingerprint an event log");
  auto* pt = p->add_subcommand("report", "Fingerprint an event log, optionally beside the reference table");
  for (auto* c : {pa, pt}) {
    c->add_option("--in", prof.in, "Event log")->required()->check(CLI::ExistingFile);
    c->add_option("--duration-ms", prof.span_ms, "Probe duration the log covers (default 10000)");
  }
  pt->add_flag("--reference", prof.reference, "Compare against published per-platform period and tick rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*b) {
    if (g.format.empty()) g.format = bill.input.empty() ? "json" : "csv";
    cmd_bill(g, bill);
  } else if (*a) {
    cmd_analyze(g, an);
  } else if (*s) {
    if (g.format.empty()) g.format = "csv";
    cmd_simulate(g, sim);
  } else if (*pr) {
    cmd_profile_run(g, prof);
  } else if (*pp) {
    cmd_profile_replay(g, prof);
  } else if (*pa) {
    cmd_profile_analyze(g, prof, false);
  } else if (*pt) {
    cmd_profile_analyze(g, prof, true);
  }
  return 0;
}

}  // namespace
}  // namespace faascost::cli

int main(int argc, char** argv) {
  try {
    return faascost::cli::run_cli(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "faascost: error: " << e.what() << "\n";
    return 1;
  }
}
