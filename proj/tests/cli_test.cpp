#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "faascost/billing/billing.hpp"
#include "faascost/trace/ingest.hpp"
#include "json.hpp"
#include "support/synthetic_trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("faascost_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(FAASCOST_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(CliTest, BillAt96MsAllocationChargeEqualsFee) {
  const auto r = run("bill --platform aws --mem-mb 128 --exec-ms 96");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["platform"], "aws-lambda");
  const double fee = std::stod(doc["fee_usd"].get<std::string>());
  double alloc = 0.0;
  for (const auto& [name, term] : doc["alloc_terms"].items()) alloc += std::stod(term["usd"].get<std::string>());
  EXPECT_NEAR(alloc, fee, 1e-12);
  EXPECT_DOUBLE_EQ(fee, 2e-7);
}

TEST_F(CliTest, ZeroExecutionPaysTheFee) {
  const auto r = run("bill --platform aws-lambda --exec-ms 0");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["total_usd"], doc["fee_usd"]);
}

TEST_F(CliTest, BillErrorsExitNonzero) {
  auto r = run("bill --platform no-such-platform --exec-ms 1");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("unknown platform"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
  r = run("bill --platform aws-lambda --exec-ms -5");
  EXPECT_NE(r.code, 0);
  r = run("bill --platform aws-lambda --exec-ms abc");
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(r.err.empty());
  r = run("--format xml bill --platform aws-lambda");
  EXPECT_NE(r.code, 0);
}

TEST_F(CliTest, BatchBillMatchesLibrary) {
  const auto trace = faascost::testing::generate_synthetic_trace(100, 9);
  const auto path = dir_ / "trace.csv";
  {
    std::ofstream out(path);
    faascost::testing::write_trace_csv(out, trace);
  }
  const auto r = run("--out-dir " + (dir_ / "out").string() + " bill --platform gcp-cloud-run --input " + path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(slurp(dir_ / "out" / "bill.csv"));
  ASSERT_EQ(rows.size(), 101u);
  EXPECT_EQ(rows[0].back(), "total_usd");

  const auto config = faascost::billing::load_platform_config(faascost::billing::resolve_platform_path("gcp-cloud-run"));
  std::ifstream in(path);
  faascost::trace::TraceReader reader(in, faascost::trace::canonical_schema());
  std::size_t i = 1;
  while (auto rec = reader.next()) {
    auto rr = *rec;
    rr.alloc = faascost::billing::normalize_allocation(rr.alloc, config);
    const auto cost = faascost::billing::compute_cost(rr, config);
    ASSERT_LT(i, rows.size());
    EXPECT_EQ(rows[i][0], rr.function_id);
    EXPECT_EQ(rows[i].back(), cost.total_usd.to_string()) << "row " << i;
    EXPECT_EQ(rows[i][2], cost.billable_time_ms.to_string()) << "row " << i;
    ++i;
  }
  EXPECT_EQ(i, 101u);

  const auto manifest = json::parse(slurp(dir_ / "out" / "run.json"));
  EXPECT_EQ(manifest["subcommand"], "bill");
  EXPECT_EQ(manifest["inputs"].size(), 1u);
}

TEST_F(CliTest, AnalyzeIsByteIdenticalAcrossRuns) {
  const auto trace = faascost::testing::generate_synthetic_trace(4000, 10);
  const auto path = dir_ / "trace.csv";
  {
    std::ofstream out(path);
    faascost::testing::write_trace_csv(out, trace);
  }
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  ASSERT_EQ(run("--seed 3 --out-dir " + a.string() + " analyze " + path.string()).code, 0);
  ASSERT_EQ(run("--seed 3 --out-dir " + b.string() + " analyze " + path.string() + " --threads 1").code, 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename();
    if (name == "run.json") continue;
    EXPECT_EQ(slurp(e.path()), slurp(b / name)) << name;
    ++compared;
  }
  EXPECT_EQ(compared, 7u);  // report.json and six figure tables

  // Digest checked against the system tool.
  const auto manifest = json::parse(slurp(a / "run.json"));
  EXPECT_EQ(manifest["seed"], 3);
  const auto r = run("");  // no subcommand
  EXPECT_NE(r.code, 0);
  const std::string cmd = "sha256sum " + path.string() + " > " + (dir_ / "sum.txt").string();
  if (std::system(cmd.c_str()) == 0) {
    EXPECT_EQ(manifest["inputs"][0]["sha256"], slurp(dir_ / "sum.txt").substr(0, 64));
  }
}

TEST_F(CliTest, AnalyzeReportMatchesGeneratorLedger) {
  const auto trace = faascost::testing::generate_synthetic_trace(20'000, 11);
  const auto path = dir_ / "trace.csv";
  {
    std::ofstream out(path);
    faascost::testing::write_trace_csv(out, trace);
  }
  const auto out = dir_ / "out";
  const auto r = run("--out-dir " + out.string() + " analyze " + path.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(slurp(out / "report.json"));
  const auto& L = trace.ledger;
  EXPECT_EQ(doc["ingest"]["records"], L.records);
  EXPECT_EQ(doc["cold_start"]["cold_starts"], L.instances);
  EXPECT_NEAR(doc["cold_start"]["fraction_nonpositive"].get<double>(),
              static_cast<double>(L.nonpositive_instances) / static_cast<double>(L.instances), 0.005);

  // Naive Pearson over the file's records.
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& rec : trace.records) {
    const double x = rec.cpu_usage_avg_vcpus / rec.alloc.vcpus;
    const double y = rec.mem_usage_mb / rec.alloc.memory_mb;
    sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
  }
  const double n = static_cast<double>(trace.records.size());
  const double rho = (sxy - sx * sy / n) / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
  EXPECT_NEAR(doc["correlation"]["pearson_r"].get<double>(), rho, 1e-6);
}

TEST_F(CliTest, UnknownSchemaColumnExitsNonzero) {
  const auto trace = faascost::testing::generate_synthetic_trace(50, 12);
  const auto path = dir_ / "trace.csv";
  {
    std::ofstream out(path);
    faascost::testing::write_trace_csv(out, trace);
  }
  auto schema = json::parse(faascost::trace::to_json(faascost::trace::canonical_schema()));
  schema["columns"]["exec_duration"]["column"] = "no_such_column";
  const auto schema_path = dir_ / "schema.json";
  std::ofstream(schema_path) << schema.dump();
  const auto r = run("--out-dir " + (dir_ / "out").string() + " analyze " + path.string() + " --schema " +
                     schema_path.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("no_such_column"), std::string::npos) << r.err;
}

TEST_F(CliTest, SimulateSweepWritesOneCurvePerPeriod) {
  const auto out = dir_ / "out";
  const auto r = run("--out-dir " + out.string() + " simulate --t 33.1 --p 5,10,20,40,80 --grid 200 --accounting exact");
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* p : {"5", "10", "20", "40", "80"}) {
    const auto rows = read_csv(slurp(out / ("curve_p" + std::string(p) + ".csv")));
    ASSERT_EQ(rows.size(), 201u) << p;
    EXPECT_EQ(rows.back()[0], "1");
    EXPECT_EQ(rows.back()[2], "33.1");
  }
  const auto manifest = json::parse(slurp(out / "run.json"));
  EXPECT_EQ(manifest["outputs"].size(), 5u);
}

// Equivalent ceiling form: every quota but the last is followed by a wait for the next period.
TEST_F(CliTest, ClosedFormOnlyMatchesFormula) {
  const auto r = run("simulate --t 33.1 --p 5,20,80 --grid 50 --closed-form-only");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_EQ(rows.size(), 151u);
  const long long t = 33100;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const long long p = std::llround(std::stod(rows[i][0]) * 1000);
    const long long q = std::llround(std::stod(rows[i][2]) * 1000);
    const long long full = (t + q - 1) / q - 1;
    const long long d = full * p + (t - full * q);
    EXPECT_DOUBLE_EQ(std::stod(rows[i][3]), static_cast<double>(d) / 1000.0) << "row " << i;
  }
}

// Bursts of 46 ms end on no coarser candidate's tick, so the rate is identifiable.
TEST_F(CliTest, ProfileReplayThenAnalyzeRecoversParameters) {
  const auto out = dir_ / "out";
  auto r = run("--out-dir " + out.string() + " profile replay --p 100 --q 45.5 --hz 1000 --duration-ms 5000 --step-us 5");
  ASSERT_EQ(r.code, 0) << r.err;
  r = run("profile analyze --in " + (out / "events.csv").string() + " --duration-ms 5000");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto fp = json::parse(r.out);
  EXPECT_EQ(fp["period_ms"], 100.0);
  EXPECT_EQ(fp["tick_hz"], 1000);

  r = run("profile report --reference --in " + (out / "events.csv").string() + " --duration-ms 5000");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(r.out);
  EXPECT_EQ(rep["matches"], json::array({"Google Cloud Run Functions"}));
  EXPECT_EQ(rep["reference"].size(), 3u);
}

TEST_F(CliTest, ProfileReplayAcceptsSimulatedTimeline) {
  const auto out = dir_ / "sim";
  ASSERT_EQ(run("--out-dir " + out.string() + " simulate --t 200 --p 20 --grid 4 --timeline-f 0.25").code, 0);
  const auto r =
      run("profile replay --timeline " + (out / "timeline_p20_f0.25.json").string() + " --duration-ms 300");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(r.out);
  ASSERT_GT(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"detected_at_us", "gap_us"}));
  const auto tl = json::parse(slurp(out / "timeline_p20_f0.25.json"));
  for (const auto& seg : tl["segments"]) {
    if (seg["state"] != "throttled") continue;
    const double end = seg["end_ms"], start = seg["start_ms"];
    EXPECT_EQ(rows[1], (std::vector<std::string>{std::to_string(std::llround(end * 1000)),
                                                  std::to_string(std::llround((end - start) * 1000))}));
    break;
  }
}

TEST_F(CliTest, ProfileRunOnUnlimitedHostIsNearlyEmpty) {
  const auto r = run("profile run --duration-ms 300");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(read_csv(r.out).size(), 30u);
}

}  // namespace
