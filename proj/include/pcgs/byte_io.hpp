#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcgs/error.hpp"

namespace pcgs {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

// Append-only little-endian writer.
class ByteWriter {
public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) { raw(&v, sizeof v); }
  void u32(uint32_t v) { raw(&v, sizeof v); }
  void u64(uint64_t v) { raw(&v, sizeof v); }
  void i64(int64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }

  void f32s(std::span<const float> v) { raw(v.data(), v.size_bytes()); }
  void u16s(std::span<const uint16_t> v) { raw(v.data(), v.size_bytes()); }
  void bytes(std::span<const uint8_t> v) { raw(v.data(), v.size()); }
  void tag(std::string_view t) { raw(t.data(), t.size()); }

  // Writes a 4-byte tag followed by a u64 length and the payload.
  void chunk(std::string_view tag4, std::span<const uint8_t> payload)
  {
    tag(tag4);
    u64(payload.size());
    bytes(payload);
  }

  size_t size() const { return buf_.size(); }
  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

private:
  void raw(const void* p, size_t n)
  {
    auto b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }

  std::vector<uint8_t> buf_;
};

// Bounds-checked little-endian reader over a borrowed buffer.
class ByteReader {
public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t u8() { return get<uint8_t>(); }
  uint16_t u16() { return get<uint16_t>(); }
  uint32_t u32() { return get<uint32_t>(); }
  uint64_t u64() { return get<uint64_t>(); }
  int64_t i64() { return get<int64_t>(); }
  float f32() { return get<float>(); }

  void f32s(std::span<float> out) { copy(out.data(), out.size_bytes()); }
  void u16s(std::span<uint16_t> out) { copy(out.data(), out.size_bytes()); }

  std::string tag(size_t n)
  {
    need(n);
    std::string t(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return t;
  }

  std::span<const uint8_t> bytes(uint64_t n)
  {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  bool starts_with(std::string_view t) const
  {
    return remaining() >= t.size()
      && std::memcmp(data_.data() + pos_, t.data(), t.size()) == 0;
  }

  size_t pos() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

private:
  void need(uint64_t n) const
  {
    if (n > remaining())
      fail(ErrorKind::format, "unexpected end of data");
  }

  void copy(void* out, size_t n)
  {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }

  template<typename T>
  T get()
  {
    T v;
    copy(&v, sizeof v);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace pcgs
