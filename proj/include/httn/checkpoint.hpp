#ifndef HTTN_CHECKPOINT_HPP
#define HTTN_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "httn/corpus.hpp"
#include "httn/matrix.hpp"

namespace httn {

/// Named-array container.
///
/// Layout (all integers little-endian):
///   "HTTN" | u32 version | u32 array_count |
///   per array: u32 name_len | name bytes | u32 rows | u32 cols | rows*cols f64 |
///   u32 config_len | config bytes (UTF-8 key=value text)
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, Matrix value) {
    for (auto& [n, m] : arrays_) {
      if (n == name) {
        m = std::move(value);
        return;
      }
    }
    arrays_.emplace_back(name, std::move(value));
  }

  bool has(const std::string& name) const {
    for (const auto& [n, m] : arrays_)
      if (n == name) return true;
    return false;
  }

  const Matrix& get(const std::string& name) const {
    for (const auto& [n, m] : arrays_)
      if (n == name) return m;
    throw DataError("checkpoint has no array \"" + name + "\"");
  }

  const std::vector<std::pair<std::string, Matrix>>& arrays() const noexcept { return arrays_; }

  std::string config;

  std::string serialize() const {
    std::string out = "HTTN";
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(arrays_.size()));
    for (const auto& [name, m] : arrays_) {
      put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      put_u32(out, static_cast<std::uint32_t>(m.rows()));
      put_u32(out, static_cast<std::uint32_t>(m.cols()));
      for (double x : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
    }
    put_u32(out, static_cast<std::uint32_t>(config.size()));
    out += config;
    return out;
  }

  static Checkpoint deserialize(std::string_view bytes) {
    Reader in{bytes};
    if (in.take(4) != "HTTN") throw DataError("not a checkpoint (bad magic)");
    const std::uint32_t version = in.u32();
    if (version != kVersion) {
      throw DataError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kVersion) + ")");
    }
    Checkpoint ck;
    const std::uint32_t count = in.u32();
    for (std::uint32_t a = 0; a < count; ++a) {
      const std::uint32_t name_len = in.u32();
      std::string name(in.take(name_len));
      const std::uint32_t rows = in.u32();
      const std::uint32_t cols = in.u32();
      const std::size_t n = static_cast<std::size_t>(rows) * cols;
      if (n > in.remaining() / 8) throw DataError("truncated checkpoint array \"" + name + "\"");
      std::vector<double> data(n);
      for (double& x : data) x = std::bit_cast<double>(in.u64());
      ck.arrays_.emplace_back(std::move(name), Matrix(rows, cols, std::move(data)));
    }
    const std::uint32_t config_len = in.u32();
    ck.config = std::string(in.take(config_len));
    if (in.remaining() != 0) throw DataError("trailing bytes after checkpoint");
    return ck;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
  }

 private:
  static void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  static void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  struct Reader {
    std::string_view bytes;
    std::size_t pos = 0;

    std::size_t remaining() const { return bytes.size() - pos; }
    std::string_view take(std::size_t n) {
      if (n > remaining()) throw DataError("truncated checkpoint");
      auto s = bytes.substr(pos, n);
      pos += n;
      return s;
    }
    std::uint64_t little(std::size_t width) {
      const auto s = take(width);
      std::uint64_t v = 0;
      for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
      return v;
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(little(4)); }
    std::uint64_t u64() { return little(8); }
  };

  std::vector<std::pair<std::string, Matrix>> arrays_;
};

}  // namespace httn

#endif  // HTTN_CHECKPOINT_HPP
