#include "ecodrive/common.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace ecodrive {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(fmt::format("cannot write '{}'", tmp.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError(fmt::format("short write to '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("ECODRIVE_SEED");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  auto value = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') throw ConfigError(fmt::format("ECODRIVE_SEED is not an integer: '{}'", env));
  return value;
}

}  // namespace ecodrive
