#include "rpca/io_util.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rpca/common.hpp"

#ifndef RPCA_SOURCE_ASSETS
#define RPCA_SOURCE_ASSETS ""
#endif

namespace rpca {

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), ErrorKind::io, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_file(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    check(out.good(), ErrorKind::io, "cannot write file: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    check(out.good(), ErrorKind::io, "short write: " + tmp.string());
  }
  fs::rename(tmp, path);
}

nlohmann::json read_json_file(const fs::path& path) {
  return nlohmann::json::parse(read_text_file(path));
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  atomic_write_file(path, j.dump(1) + "\n");
}

fs::path asset_dir() {
  if (const char* env = std::getenv("RPCA_ASSETS_DIR")) return fs::path(env);
  return fs::path(RPCA_SOURCE_ASSETS);
}

fs::path weights_dir_from_env() {
  if (const char* env = std::getenv("RPCA_WEIGHTS_DIR")) return fs::path(env);
  return fs::path("weights");
}

}  // namespace rpca
