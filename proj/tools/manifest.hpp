#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace faascost::cli {

struct InputDigest {
  std::string path;
  std::string sha256;
};

// Written as run.json into each output directory.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> arguments;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<InputDigest> inputs;
  std::vector<std::string> outputs;
  double wall_time_s = 0.0;
};

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace faascost::cli
