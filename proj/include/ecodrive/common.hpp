#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecodrive {

inline constexpr int kSchemaVersion = 1;

/// Base for every error the library raises. `category()` drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { config, validation, io, data, usage, fault };

  Error(Category category, const std::string& what) : std::runtime_error(what), category_(category) {}
  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Category::validation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Category::data, what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(Category::usage, what) {}
};

class SimulationFault : public Error {
 public:
  explicit SimulationFault(const std::string& what) : Error(Category::fault, what) {}
};

// splitmix64 finalizer; used to derive independent streams from (seed, salt, ...).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

template <typename... Rest>
constexpr std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b, Rest... rest) noexcept {
  return hash_combine(hash_combine(a, b), static_cast<std::uint64_t>(rest)...);
}

/// Uniform double in [0, 1) from a 64-bit hash.
constexpr double unit_from_hash(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) { return Rng(hash_combine(seed, stream)); }

// Named stream salts so callers never collide by accident.
namespace stream {
inline constexpr std::uint64_t arrivals = 0xA11;
inline constexpr std::uint64_t drivers = 0xD21;
inline constexpr std::uint64_t intents = 0x1A7;
inline constexpr std::uint64_t control = 0xC7B;
inline constexpr std::uint64_t fleet = 0xF1E;
inline constexpr std::uint64_t lanes = 0x1A9;
inline constexpr std::uint64_t policy = 0x9C1;
inline constexpr std::uint64_t sampling = 0x5A3;
}  // namespace stream

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Seed from ECODRIVE_SEED when set, else `fallback`.
std::uint64_t seed_from_env(std::uint64_t fallback);

}  // namespace ecodrive
