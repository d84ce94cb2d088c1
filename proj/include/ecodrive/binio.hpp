#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "ecodrive/common.hpp"

namespace ecodrive::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void magic(std::string_view m) { raw(m.data(), m.size()); }
  const std::string& bytes() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  double f64() { return pod<double>(); }
  std::vector<double> f64s() {
    const auto n = u64();
    if (n > (data_.size() - pos_) / sizeof(double)) throw DataError("binary array length exceeds file size");
    std::vector<double> v(n);
    take(v.data(), n * sizeof(double));
    return v;
  }
  std::string str() {
    const auto n = u32();
    if (n > data_.size() - pos_) throw DataError("binary string length exceeds file size");
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }
  void expect_magic(std::string_view m) {
    if (data_.substr(pos_, m.size()) != m) throw DataError("unrecognized binary file (bad magic)");
    pos_ += m.size();
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof v);
    return v;
  }
  void take(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw DataError("binary file is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace ecodrive::binio
