#include "atscc/io.hpp"

#include <charconv>
#include <sstream>

namespace atscc::io {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(field) + "'");
  }
  return v;
}

constexpr char kMetaTag[] = "META";
constexpr char kSegsTag[] = "SEGS";

}  // namespace

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<RawRecord> parse_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw FormatError(std::string("missing CSV header '") + kCsvHeader + "'");
  }
  std::vector<RawRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 5) {
      throw FormatError("line " + std::to_string(lineno) + ": expected 5 fields, got " +
                        std::to_string(fields.size()));
    }
    out.push_back({std::string(trim(fields[0])), parse_double(fields[1], lineno),
                   parse_double(fields[2], lineno), parse_double(fields[3], lineno),
                   parse_double(fields[4], lineno)});
  }
  return out;
}

std::vector<RawRecord> read_records_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_records_csv(in);
}

void write_records_csv(const std::filesystem::path& path, std::span<const RawRecord> records) {
  auto out = open_output(path);
  out << kCsvHeader << '\n';
  out.precision(17);
  for (const auto& r : records) {
    out << r.flight_id << ',' << r.timestamp_s << ',' << r.lat_deg << ',' << r.lon_deg << ','
        << r.baro_alt_m << '\n';
  }
}

std::string BinaryReader::bytes(std::size_t n) {
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  if (in_.gcount() != static_cast<std::streamsize>(n)) throw FormatError("truncated file");
  return s;
}

bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

void write_dataset(std::ostream& out, const Dataset& data) {
  BinaryWriter w(out);
  w.bytes(std::string_view(kDatasetMagic, 4));
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    w.str(data.id(i));
    const auto len = data.length(i);
    w.u32(static_cast<std::uint32_t>(len));
    const auto rows = data.padded_states(i);
    for (std::size_t k = 0; k < len * Dataset::kStateDim; ++k) w.f64(rows[k]);
    w.i32(data.label(i).value_or(-1));
  }

  std::ostringstream meta;
  BinaryWriter mw(meta);
  Metadata md = data.meta();
  md.set("units", data.units() == Units::scaled ? "scaled" : "meters");
  mw.u32(static_cast<std::uint32_t>(md.entries().size()));
  for (const auto& [k, v] : md.entries()) {
    mw.str(k);
    mw.str(v);
  }
  w.bytes(std::string_view(kMetaTag, 4));
  w.str(meta.str());

  if (data.has_segment_ids()) {
    std::ostringstream segs;
    BinaryWriter sw(segs);
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (auto id : data.segment_ids(i)) sw.u32(id);
    }
    w.bytes(std::string_view(kSegsTag, 4));
    w.str(segs.str());
  }
  if (!out) throw std::runtime_error("write failed");
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_output(path);
  write_dataset(out, data);
}

Dataset read_dataset(std::istream& in) {
  BinaryReader r(in);
  if (r.bytes(4) != std::string_view(kDatasetMagic, 4)) throw FormatError("not an ATSC dataset file");
  if (const auto version = r.u16(); version != kDatasetVersion) {
    throw FormatError("unsupported dataset format version " + std::to_string(version));
  }
  const auto n = r.u32();
  std::vector<Trajectory> trajs(n);
  for (auto& tr : trajs) {
    tr.id = r.str();
    const auto len = r.u32();
    tr.states.resize(len);
    for (auto& s : tr.states) {
      s.x = r.f64();
      s.y = r.f64();
      s.z = r.f64();
    }
    if (const auto label = r.i32(); label >= 0) tr.label = label;
  }

  Metadata meta;
  std::vector<SegmentIds> segs;
  while (!r.at_end()) {
    const auto tag = r.bytes(4);
    std::istringstream payload(r.str());
    BinaryReader pr(payload);
    if (tag == kMetaTag) {
      const auto count = pr.u32();
      for (std::uint32_t k = 0; k < count; ++k) {
        auto key = pr.str();
        meta.set(key, pr.str());
      }
    } else if (tag == kSegsTag) {
      for (const auto& tr : trajs) {
        SegmentIds ids(tr.states.size());
        for (auto& id : ids) id = pr.u32();
        segs.push_back(std::move(ids));
      }
    }
    // Unknown sections are skipped.
  }

  const Units units = meta.get("units").value_or("scaled") == "meters" ? Units::meters : Units::scaled;
  for (auto& tr : trajs) tr.units = units;
  Dataset data = pad_dataset(trajs);
  if (!segs.empty()) data.set_segment_ids(segs);
  data.meta() = meta;
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      // Bare section markers such as "[procedure]" are passed through as keys.
      out.emplace_back(std::string(s), "");
      continue;
    }
    auto key = trim(s.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(s.substr(eq + 1))));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_key_values(in);
}

}  // namespace atscc::io
