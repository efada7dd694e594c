#include "binary_io.hpp"

#include <cstdio>
#include <filesystem>

namespace gridreg::detail {

std::vector<unsigned char> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw io_error(path + ": cannot open for reading");
  std::fseek(f, 0, SEEK_END);
  long n = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> bytes(static_cast<size_t>(n < 0 ? 0 : n));
  size_t got = bytes.empty() ? 0 : std::fread(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (got != bytes.size()) throw io_error(path + ": short read");
  return bytes;
}

void write_file_atomic(const std::string& path,
                       const std::vector<unsigned char>& bytes) {
  const std::string tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw io_error(tmp + ": cannot open for writing");
  size_t put = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
  const bool flushed = std::fflush(f) == 0;
  std::fclose(f);
  if (put != bytes.size() || !flushed) {
    std::remove(tmp.c_str());
    throw io_error(tmp + ": short write");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    throw io_error(path + ": rename failed: " + ec.message());
  }
}

}  // namespace gridreg::detail
