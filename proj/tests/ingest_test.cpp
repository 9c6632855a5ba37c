#include <gtest/gtest.h>

#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <fstream>
#include <sstream>

#include "faascost/trace/ingest.hpp"
#include "support/synthetic_trace.hpp"

namespace faascost::trace {
namespace {

std::vector<InvocationRecord> read_all(const std::string& text, const SchemaMap& schema, IngestCounters* counters = nullptr) {
  std::istringstream in(text);
  TraceReader reader(in, schema);
  std::vector<InvocationRecord> out;
  while (auto r = reader.next()) out.push_back(*r);
  if (counters) *counters = reader.counters();
  return out;
}

const char* kHuaweiLikeSchema = R"({
  "delimiter": ";",
  "memory_semantics": "mean",
  "filter_zero_cpu": true,
  "columns": {
    "function_id": {"column": "funcName"},
    "instance_id": {"column": "podID"},
    "arrival_ts": {"column": "time", "unit": "s"},
    "exec_duration": {"column": "runtime", "unit": "s"},
    "init_duration": {"column": "coldStartCost", "unit": "us"},
    "vcpus": {"column": "cpuLimit", "unit": "millicore"},
    "memory": {"column": "memLimit", "unit": "gb"},
    "cpu_usage": {"column": "cpuUsage", "unit": "percent_of_alloc"},
    "mem_usage": {"column": "memUsage", "unit": "bytes"}
  }
})";

TEST(SchemaMapTest, ParsesBindingsAndUnits) {
  const auto s = parse_schema_map(kHuaweiLikeSchema);
  EXPECT_EQ(s.delimiter, ';');
  EXPECT_EQ(s.memory_semantics, MemorySemantics::mean);
  EXPECT_EQ(s.columns.at(Field::vcpus).column, "cpuLimit");
  EXPECT_EQ(s.columns.at(Field::vcpus).unit, "millicore");
  EXPECT_FALSE(s.columns.count(Field::is_cold_start));
  const auto again = parse_schema_map(to_json(s));
  EXPECT_EQ(to_json(again), to_json(s));
}

TEST(SchemaMapTest, RejectsUnknownFieldUnitMismatchAndMissingRequired) {
  EXPECT_THROW(parse_schema_map(R"({"columns": {"gpu": {"column": "g"}}})"), SchemaError);
  auto doc = std::string(kHuaweiLikeSchema);
  const auto mem_unit = doc.find(R"("unit": "gb")");
  auto bad = doc;
  bad.replace(mem_unit, 12, R"("unit": "ms")");
  EXPECT_THROW(parse_schema_map(bad), SchemaError);
  EXPECT_THROW(parse_schema_map(R"({"columns": {"function_id": "f"}})"), SchemaError);
  EXPECT_THROW(parse_schema_map(R"({"columns": {"function_id": {"column": "f", "unit": "ms"}}})"), SchemaError);
  EXPECT_THROW(parse_schema_map(R"({"delimiter": 5})"), SchemaError);
  EXPECT_THROW(parse_schema_map("not json"), SchemaError);
}

TEST(TraceReaderTest, MissingColumnIsFatal) {
  std::istringstream in("function_id,instance_id\nf,i\n");
  EXPECT_THROW(TraceReader(in, canonical_schema()), SchemaError);
}

TEST(TraceReaderTest, ThreeRowFixtureExactValues) {
  const std::string text =
      "funcName;podID;time;runtime;coldStartCost;cpuLimit;memLimit;cpuUsage;memUsage\n"
      "f1;p1;10;0.05;250000;1000;1;50;268435456\n"
      "f1;p1;10.2;0.125;0;1000;1;25;134217728\n"
      "\"f;2\";p9;11;1.5;0;500;0.5;100;536870912\n";
  IngestCounters c;
  const auto recs = read_all(text, parse_schema_map(kHuaweiLikeSchema), &c);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(c.rows, 3u);
  EXPECT_EQ(c.records, 3u);

  EXPECT_EQ(recs[0].function_id, "f1");
  EXPECT_EQ(recs[0].instance_id, "p1");
  EXPECT_DOUBLE_EQ(recs[0].arrival_ts_ms, 10000.0);
  EXPECT_DOUBLE_EQ(recs[0].exec_duration_ms, 50.0);
  EXPECT_DOUBLE_EQ(recs[0].init_duration_ms, 250.0);
  EXPECT_TRUE(recs[0].is_cold_start);
  EXPECT_DOUBLE_EQ(recs[0].alloc.vcpus, 1.0);
  EXPECT_DOUBLE_EQ(recs[0].alloc.memory_mb, 1024.0);
  EXPECT_DOUBLE_EQ(recs[0].cpu_usage_avg_vcpus, 0.5);
  EXPECT_DOUBLE_EQ(recs[0].mem_usage_mb, 256.0);

  EXPECT_FALSE(recs[1].is_cold_start);
  EXPECT_DOUBLE_EQ(recs[1].exec_duration_ms, 125.0);
  EXPECT_DOUBLE_EQ(recs[1].cpu_usage_avg_vcpus, 0.25);

  EXPECT_EQ(recs[2].function_id, "f;2");
  EXPECT_DOUBLE_EQ(recs[2].alloc.vcpus, 0.5);
  EXPECT_DOUBLE_EQ(recs[2].alloc.memory_mb, 512.0);
  EXPECT_DOUBLE_EQ(recs[2].cpu_usage_avg_vcpus, 0.5);
  EXPECT_DOUBLE_EQ(recs[2].mem_usage_mb, 512.0);
}

TEST(TraceReaderTest, MalformedRowsAreCountedAndSkipped) {
  const std::string text =
      "function_id,instance_id,arrival_ts_ms,exec_duration_ms,init_duration_ms,is_cold_start,vcpus,memory_mb,"
      "cpu_usage_vcpus,mem_usage_mb\n"
      "f,i,0,-5,0,0,1,128,0.5,10\n"    // negative duration
      "f,i,0,5,0,0,1,128,abc,10\n"     // not a number
      "f,i,0,5,0,0,1,128\n"            // short row
      "f,i,0,5,0,maybe,1,128,0.5,10\n" // bad boolean
      "\n"
      "f,i,0,5,0,0,1,128,0,10\n"       // zero CPU, filtered
      "f,i,0,5,0,1,1,128,0.5,10\n";
  IngestCounters c;
  const auto recs = read_all(text, canonical_schema(), &c);
  EXPECT_EQ(recs.size(), 1u);
  EXPECT_EQ(c.rows, 6u);
  EXPECT_EQ(c.malformed, 4u);
  EXPECT_EQ(c.filtered_zero_cpu, 1u);
  EXPECT_EQ(c.records, 1u);

  auto keep_zero = canonical_schema();
  keep_zero.filter_zero_cpu = false;
  EXPECT_EQ(read_all(text, keep_zero).size(), 2u);
}

TEST(TraceReaderTest, GzipInputIsTransparent) {
  const auto trace = testing::generate_synthetic_trace(2000, 8);
  std::ostringstream csv;
  testing::write_trace_csv(csv, trace);

  const auto dir = std::filesystem::temp_directory_path() / "faascost_ingest_test";
  std::filesystem::create_directories(dir);
  const auto gz = dir / "trace.csv.gz";
  {
    std::ofstream file(gz, std::ios::binary);
    boost::iostreams::filtering_ostream out;
    out.push(boost::iostreams::gzip_compressor());
    out.push(file);
    out << csv.str();
  }
  const auto plain = dir / "trace.csv";
  std::ofstream(plain, std::ios::binary) << csv.str();

  for (const auto& path : {gz, plain}) {
    auto in = open_trace(path);
    TraceReader reader(*in, canonical_schema());
    std::vector<InvocationRecord> got;
    while (auto r = reader.next()) got.push_back(*r);
    EXPECT_EQ(got, trace.records) << path;
  }
  std::filesystem::remove_all(dir);
}

TEST(TraceReaderTest, MillionRowsMatchGeneratorLedger) {
  const auto trace = testing::generate_synthetic_trace(1'000'000, 2026);
  std::stringstream csv;
  testing::write_trace_csv(csv, trace);

  TraceReader reader(csv, canonical_schema());
  std::uint64_t n = 0;
  double sum_exec = 0.0;
  double sum_init = 0.0;
  while (auto r = reader.next()) {
    ++n;
    sum_exec += r->exec_duration_ms;
    sum_init += r->init_duration_ms;
  }
  EXPECT_EQ(n, trace.ledger.records);
  EXPECT_EQ(reader.counters().malformed, 0u);
  // Same values summed in the same order: bit-identical.
  EXPECT_EQ(sum_exec, trace.ledger.sum_exec_ms);
  EXPECT_EQ(sum_init, trace.ledger.sum_init_ms);
}

}  // namespace
}  // namespace faascost::trace
