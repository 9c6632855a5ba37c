#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "faascost/records.hpp"

namespace faascost::trace {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Canonical record fields a trace column can bind to.
enum class Field {
  function_id,
  instance_id,
  arrival_ts,
  exec_duration,
  init_duration,
  is_cold_start,
  vcpus,
  memory,
  cpu_usage,
  mem_usage,
};

enum class MemorySemantics { peak, mean };

struct ColumnBinding {
  std::string column;
  std::string unit;  // empty for text and boolean fields
};

// Maps canonical fields onto the columns of one trace format.
struct SchemaMap {
  char delimiter = ',';
  std::map<Field, ColumnBinding> columns;
  MemorySemantics memory_semantics = MemorySemantics::peak;
  bool filter_zero_cpu = true;
};

std::string to_string(Field f);
std::string to_string(MemorySemantics m);

SchemaMap parse_schema_map(const std::string& json_text);
SchemaMap load_schema_map(const std::filesystem::path& path);
std::string to_json(const SchemaMap& schema);

// Schema for the canonical CSV written by write_canonical_csv.
SchemaMap canonical_schema();

struct IngestCounters {
  std::uint64_t rows = 0;  // data rows seen, header excluded
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  std::uint64_t filtered_zero_cpu = 0;

  friend bool operator==(const IngestCounters&, const IngestCounters&) = default;
};

class TraceReader {
 public:
  /// Reads the header row. Throws SchemaError when a bound column is absent.
  TraceReader(std::istream& in, SchemaMap schema);

  /// Next valid record in file order, or nullopt at end of input.
  std::optional<InvocationRecord> next();

  const IngestCounters& counters() const { return counters_; }
  const SchemaMap& schema() const { return schema_; }

 private:
  bool parse_row(const std::vector<std::string>& cells, InvocationRecord& out) const;

  std::istream& in_;
  SchemaMap schema_;
  std::map<Field, std::size_t> index_;
  std::size_t width_ = 0;
  IngestCounters counters_;
  std::string line_;
  std::vector<std::string> cells_;
};

// Opens a trace file, decompressing gzip input transparently.
std::unique_ptr<std::istream> open_trace(const std::filesystem::path& path);

void write_canonical_header(std::ostream& out);
void write_canonical_row(std::ostream& out, const InvocationRecord& r);

}  // namespace faascost::trace
