#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace faascost::cli {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 unavailable");
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& d : m.inputs) inputs.push_back({{"path", d.path}, {"sha256", d.sha256}});
  const nlohmann::json doc = {{"subcommand", m.subcommand},
                              {"arguments", m.arguments},
                              {"config_paths", m.config_paths},
                              {"seed", m.seed},
                              {"version", m.version},
                              {"inputs", inputs},
                              {"outputs", m.outputs},
                              {"wall_time_s", m.wall_time_s}};
  return doc.dump(2) + "\n";
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::ofstream out(dir / "run.json");
  out << manifest_to_json(m);
  if (!out) throw std::runtime_error("cannot write " + (dir / "run.json").string());
}

}  // namespace faascost::cli
