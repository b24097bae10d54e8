#pragma once

// Interchange formats: raw-record CSV, the little-endian binary containers
// and the key = value config text used by preprocessing and scenarios.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atscc/core.hpp"

namespace atscc::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCsvHeader[] = "flight_id,timestamp_s,lat_deg,lon_deg,baro_alt_m";

std::vector<RawRecord> read_records_csv(const std::filesystem::path& path);
std::vector<RawRecord> parse_records_csv(std::istream& in);
void write_records_csv(const std::filesystem::path& path, std::span<const RawRecord> records);

/// Little-endian primitive writer over an output stream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

 private:
  template <typename U>
  void put(U v) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, sizeof(U));
  }
  std::ostream& out_;
};

/// Little-endian primitive reader; throws FormatError("truncated file") on
/// short reads.
class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::string bytes(std::size_t n);
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  std::string str() { return bytes(u32()); }
  bool at_end();

 private:
  template <typename U>
  U get() {
    unsigned char buf[sizeof(U)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(U));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(U))) throw FormatError("truncated file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    return v;
  }
  std::istream& in_;
};

inline constexpr char kDatasetMagic[] = "ATSC";
inline constexpr std::uint16_t kDatasetVersion = 1;

/// Writes the processed-dataset container: magic, version, N, one block per
/// flight (id, T_i, T_i x 3 doubles, label with -1 = unlabeled), then tagged
/// trailing sections (META key/values, SEGS per-flight uint32 segment IDs).
void write_dataset(const std::filesystem::path& path, const Dataset& data);
void write_dataset(std::ostream& out, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment. Keys keep file order and
/// may repeat.
KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::filesystem::path& path);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace atscc::io
