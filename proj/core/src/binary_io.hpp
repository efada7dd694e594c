#pragma once

// Internal little-endian binary file helpers shared by the .vol/.grid/
// checkpoint writers. Writes go to a temp file and are renamed into place.

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridreg::detail {

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  void raw(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    raw(b, 4);
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f32_array(const float* p, size_t n) {
    for (size_t i = 0; i < n; ++i) f32(p[i]);
  }
  void i32_array(const std::int32_t* p, size_t n) {
    for (size_t i = 0; i < n; ++i) u32(static_cast<std::uint32_t>(p[i]));
  }
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> bytes, std::string path)
      : buf_(std::move(bytes)), path_(std::move(path)) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

  void need(size_t n, const char* what) {
    if (remaining() < n)
      throw format_error(path_ + ": truncated while reading " + what +
                         " at byte offset " + std::to_string(pos_));
  }
  void raw(void* p, size_t n, const char* what) {
    need(n, what);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    raw(&v, 1, what);
    return v;
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    raw(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> buf_;
  std::string path_;
  size_t pos_ = 0;
};

// Whole-file read; throws io_error with the path on failure.
std::vector<unsigned char> read_file(const std::string& path);
// Atomic replace: write <path>.tmp then rename.
void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& bytes);

}  // namespace gridreg::detail
