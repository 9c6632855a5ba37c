#include "faascost/trace/ingest.hpp"

#include <boost/iostreams/filter/gzip.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "text.hpp"

namespace faascost::trace {

namespace {

using nlohmann::json;

const std::map<std::string, Field>& field_names() {
  static const std::map<std::string, Field> names = {
      {"function_id", Field::function_id},     {"instance_id", Field::instance_id},
      {"arrival_ts", Field::arrival_ts},       {"exec_duration", Field::exec_duration},
      {"init_duration", Field::init_duration}, {"is_cold_start", Field::is_cold_start},
      {"vcpus", Field::vcpus},                 {"memory", Field::memory},
      {"cpu_usage", Field::cpu_usage},         {"mem_usage", Field::mem_usage},
  };
  return names;
}

constexpr Field kRequired[] = {Field::function_id, Field::exec_duration, Field::vcpus,
                               Field::memory,      Field::cpu_usage,     Field::mem_usage};

const std::map<std::string, double> kTimeUnits = {{"us", 1e-3}, {"ms", 1.0}, {"s", 1e3}};
const std::map<std::string, double> kCpuUnits = {{"vcpu", 1.0}, {"millicore", 1e-3}};
const std::map<std::string, double> kMemUnits = {
    {"bytes", 1.0 / (1024.0 * 1024.0)}, {"kb", 1.0 / 1024.0}, {"mb", 1.0}, {"gb", 1024.0}};
const std::map<std::string, double> kShareUnits = {{"fraction_of_alloc", 1.0}, {"percent_of_alloc", 0.01}};

bool is_text(Field f) {
  return f == Field::function_id || f == Field::instance_id || f == Field::is_cold_start;
}

// Accepted units per field. Empty for unitless fields.
std::vector<const std::map<std::string, double>*> unit_tables(Field f) {
  switch (f) {
    case Field::arrival_ts:
    case Field::exec_duration:
    case Field::init_duration:
      return {&kTimeUnits};
    case Field::vcpus:
      return {&kCpuUnits};
    case Field::memory:
      return {&kMemUnits};
    case Field::cpu_usage:
      return {&kCpuUnits, &kShareUnits};
    case Field::mem_usage:
      return {&kMemUnits, &kShareUnits};
    default:
      return {};
  }
}

void check_unit(Field f, const std::string& unit) {
  if (is_text(f)) {
    if (!unit.empty()) throw SchemaError("unit mismatch: field '" + to_string(f) + "' takes no unit, got '" + unit + "'");
    return;
  }
  if (unit.empty()) throw SchemaError("field '" + to_string(f) + "' requires a unit");
  for (const auto* table : unit_tables(f))
    if (table->count(unit)) return;
  throw SchemaError("unit mismatch: '" + unit + "' is not valid for field '" + to_string(f) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one delimited line. Double-quoted cells may contain the delimiter;
// "" inside quotes is a literal quote.
void split(const std::string& line, char delim, std::vector<std::string>& out) {
  out.clear();
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.emplace_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.emplace_back(trim(cell));
}

std::optional<double> number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<bool> boolean(std::string_view s) {
  std::string lower(s);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "1" || lower == "true" || lower == "yes" || lower == "t") return true;
  if (lower == "0" || lower == "false" || lower == "no" || lower == "f" || lower.empty()) return false;
  return std::nullopt;
}

double scale_of(Field f, const std::string& unit) {
  for (const auto* table : unit_tables(f)) {
    auto it = table->find(unit);
    if (it != table->end()) return it->second;
  }
  return 1.0;
}

bool is_share(const std::string& unit) { return kShareUnits.count(unit) > 0; }

}  // namespace

std::string to_string(Field f) {
  for (const auto& [name, field] : field_names())
    if (field == f) return name;
  return "unknown";
}

std::string to_string(MemorySemantics m) { return m == MemorySemantics::peak ? "peak" : "mean"; }

namespace {

SchemaMap parse_schema_doc(const json& doc);

}  // namespace

SchemaMap parse_schema_map(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("schema map is not valid JSON: ") + e.what());
  }
  try {
    return parse_schema_doc(doc);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema map has a malformed value: ") + e.what());
  }
}

namespace {

SchemaMap parse_schema_doc(const json& doc) {
  if (!doc.is_object()) throw SchemaError("schema map must be a JSON object");

  SchemaMap schema;
  for (const auto& [key, value] : doc.items()) {
    if (key == "delimiter") {
      const auto d = value.get<std::string>();
      if (d == "\\t" || d == "tab") {
        schema.delimiter = '\t';
      } else if (d.size() == 1) {
        schema.delimiter = d[0];
      } else {
        throw SchemaError("delimiter must be a single character");
      }
    } else if (key == "memory_semantics") {
      const auto m = value.get<std::string>();
      if (m == "peak") {
        schema.memory_semantics = MemorySemantics::peak;
      } else if (m == "mean") {
        schema.memory_semantics = MemorySemantics::mean;
      } else {
        throw SchemaError("memory_semantics must be 'peak' or 'mean'");
      }
    } else if (key == "filter_zero_cpu") {
      schema.filter_zero_cpu = value.get<bool>();
    } else if (key == "columns") {
      if (!value.is_object()) throw SchemaError("columns must be an object");
      for (const auto& [field_name, binding] : value.items()) {
        auto it = field_names().find(field_name);
        if (it == field_names().end()) throw SchemaError("unknown field in schema map: '" + field_name + "'");
        ColumnBinding b;
        if (binding.is_string()) {
          b.column = binding.get<std::string>();
        } else if (binding.is_object() && binding.contains("column")) {
          b.column = binding.at("column").get<std::string>();
          if (binding.contains("unit")) b.unit = binding.at("unit").get<std::string>();
          for (const auto& [k, v] : binding.items())
            if (k != "column" && k != "unit") throw SchemaError("unknown key '" + k + "' for field " + field_name);
        } else {
          throw SchemaError("binding for '" + field_name + "' needs a column");
        }
        check_unit(it->second, b.unit);
        schema.columns[it->second] = b;
      }
    } else {
      throw SchemaError("unknown schema map key: '" + key + "'");
    }
  }
  for (Field f : kRequired)
    if (!schema.columns.count(f)) throw SchemaError("schema map does not bind required field '" + to_string(f) + "'");
  return schema;
}

}  // namespace

SchemaMap load_schema_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema map " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_schema_map(text);
}

std::string to_json(const SchemaMap& schema) {
  json doc;
  doc["delimiter"] = schema.delimiter == '\t' ? std::string("\\t") : std::string(1, schema.delimiter);
  doc["memory_semantics"] = to_string(schema.memory_semantics);
  doc["filter_zero_cpu"] = schema.filter_zero_cpu;
  json cols = json::object();
  for (const auto& [f, b] : schema.columns) {
    json entry{{"column", b.column}};
    if (!b.unit.empty()) entry["unit"] = b.unit;
    cols[to_string(f)] = entry;
  }
  doc["columns"] = cols;
  return doc.dump(2);
}

SchemaMap canonical_schema() {
  SchemaMap s;
  s.columns = {
      {Field::function_id, {"function_id", ""}},
      {Field::instance_id, {"instance_id", ""}},
      {Field::arrival_ts, {"arrival_ts_ms", "ms"}},
      {Field::exec_duration, {"exec_duration_ms", "ms"}},
      {Field::init_duration, {"init_duration_ms", "ms"}},
      {Field::is_cold_start, {"is_cold_start", ""}},
      {Field::vcpus, {"vcpus", "vcpu"}},
      {Field::memory, {"memory_mb", "mb"}},
      {Field::cpu_usage, {"cpu_usage_vcpus", "vcpu"}},
      {Field::mem_usage, {"mem_usage_mb", "mb"}},
  };
  return s;
}

TraceReader::TraceReader(std::istream& in, SchemaMap schema) : in_(in), schema_(std::move(schema)) {
  if (!std::getline(in_, line_)) throw SchemaError("trace has no header row");
  if (line_.size() >= 3 && line_.compare(0, 3, "\xEF\xBB\xBF") == 0) line_.erase(0, 3);
  split(line_, schema_.delimiter, cells_);
  width_ = cells_.size();
  for (const auto& [field, binding] : schema_.columns) {
    auto it = std::find(cells_.begin(), cells_.end(), binding.column);
    if (it == cells_.end())
      throw SchemaError("missing column '" + binding.column + "' for field '" + to_string(field) + "'");
    index_[field] = static_cast<std::size_t>(it - cells_.begin());
  }
}

bool TraceReader::parse_row(const std::vector<std::string>& cells, InvocationRecord& r) const {
  if (cells.size() != width_) return false;
  auto num = [&](Field f, double& dst) -> bool {
    auto it = index_.find(f);
    if (it == index_.end()) return true;
    const auto v = number(cells[it->second]);
    if (!v) return false;
    dst = *v * scale_of(f, schema_.columns.at(f).unit);
    return true;
  };

  r.function_id = cells[index_.at(Field::function_id)];
  if (auto it = index_.find(Field::instance_id); it != index_.end()) r.instance_id = cells[it->second];
  if (!num(Field::arrival_ts, r.arrival_ts_ms) || !num(Field::exec_duration, r.exec_duration_ms) ||
      !num(Field::init_duration, r.init_duration_ms) || !num(Field::vcpus, r.alloc.vcpus) ||
      !num(Field::memory, r.alloc.memory_mb) || !num(Field::cpu_usage, r.cpu_usage_avg_vcpus) ||
      !num(Field::mem_usage, r.mem_usage_mb))
    return false;
  if (is_share(schema_.columns.at(Field::cpu_usage).unit)) r.cpu_usage_avg_vcpus *= r.alloc.vcpus;
  if (is_share(schema_.columns.at(Field::mem_usage).unit)) r.mem_usage_mb *= r.alloc.memory_mb;
  if (auto it = index_.find(Field::is_cold_start); it != index_.end()) {
    const auto b = boolean(cells[it->second]);
    if (!b) return false;
    r.is_cold_start = *b;
  } else {
    r.is_cold_start = r.init_duration_ms > 0.0;
  }
  return r.exec_duration_ms >= 0.0 && r.init_duration_ms >= 0.0 && r.alloc.vcpus >= 0.0 && r.alloc.memory_mb >= 0.0 &&
         r.cpu_usage_avg_vcpus >= 0.0 && r.mem_usage_mb >= 0.0;
}

std::optional<InvocationRecord> TraceReader::next() {
  while (std::getline(in_, line_)) {
    if (trim(line_).empty()) continue;
    ++counters_.rows;
    split(line_, schema_.delimiter, cells_);
    InvocationRecord r;
    if (!parse_row(cells_, r)) {
      ++counters_.malformed;
      continue;
    }
    if (schema_.filter_zero_cpu && r.cpu_usage_avg_vcpus == 0.0) {
      ++counters_.filtered_zero_cpu;
      continue;
    }
    ++counters_.records;
    return r;
  }
  return std::nullopt;
}

std::unique_ptr<std::istream> open_trace(const std::filesystem::path& path) {
  auto file = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*file) throw std::runtime_error("cannot open trace " + path.string());
  unsigned char magic[2] = {0, 0};
  file->read(reinterpret_cast<char*>(magic), 2);
  const bool gz = file->gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
  file->clear();
  file->seekg(0);
  if (!gz) return file;

  struct Source {
    std::unique_ptr<std::ifstream> source;
  };
  // Source is a base so the file outlives the filter chain on destruction.
  struct GzipStream : Source, boost::iostreams::filtering_istream {};
  auto stream = std::make_unique<GzipStream>();
  stream->source = std::move(file);
  stream->push(boost::iostreams::gzip_decompressor());
  stream->push(*stream->source);
  return stream;
}

void write_canonical_header(std::ostream& out) {
  out << "function_id,instance_id,arrival_ts_ms,exec_duration_ms,init_duration_ms,is_cold_start,vcpus,memory_mb,"
         "cpu_usage_vcpus,mem_usage_mb\n";
}

void write_canonical_row(std::ostream& out, const InvocationRecord& r) {
  out << r.function_id << ',' << r.instance_id << ',' << detail::shortest(r.arrival_ts_ms) << ','
      << detail::shortest(r.exec_duration_ms) << ',' << detail::shortest(r.init_duration_ms) << ','
      << (r.is_cold_start ? 1 : 0) << ',' << detail::shortest(r.alloc.vcpus) << ',' << detail::shortest(r.alloc.memory_mb)
      << ',' << detail::shortest(r.cpu_usage_avg_vcpus) << ',' << detail::shortest(r.mem_usage_mb) << '\n';
}

}  // namespace faascost::trace
