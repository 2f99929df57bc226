#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "ccn/errors.hpp"

namespace ccn::io {

inline double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

// Little-endian u32 / f32 encoder.
class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void bytes(std::string_view s) { out_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

// Decoder matching ByteWriter. Truncation raises FormatError naming `what`.
class ByteReader {
 public:
  ByteReader(std::string_view in, std::string what) : in_(in), what_(std::move(what)) {}
  std::uint32_t u32() {
    need(4, "integer");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string bytes(std::size_t n) {
    need(n, "byte string");
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }
  bool done() const { return pos_ == in_.size(); }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) {
      throw FormatError(what_ + " truncated while reading " + what + " at byte " + std::to_string(pos_));
    }
  }
  std::string_view in_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace ccn::io
