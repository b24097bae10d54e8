#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "atscc/io.hpp"

using namespace atscc;

namespace {

Dataset sample() {
  Trajectory a{"a", {{0.1, 0.2, 0.3}, {0.2, 0.3, 0.4}, {0.3, 0.4, 0.5}}, 2, Units::scaled};
  Trajectory b{"flight-b", {{-0.1, 0.0, 0.05}, {-0.2, 0.1, 0.04}}, std::nullopt, Units::scaled};
  auto d = pad_dataset({a, b});
  d.meta().set("r_max_m", "30000");
  d.set_segment_ids({{1, 2, 2}, {1, 1}});
  return d;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("dataset container round-trip") {
    auto d = sample();
    std::stringstream buf;
    io::write_dataset(buf, d);
    auto r = io::read_dataset(buf);
    REQUIRE(r.size() == 2);
    CHECK(r.id(1) == "flight-b");
    CHECK(r.label(0) == 2);
    CHECK_FALSE(r.label(1).has_value());
    CHECK(r.trajectory(0).states == d.trajectory(0).states);
    CHECK(r.segment_ids(0) == SegmentIds{1, 2, 2});
    CHECK(r.meta().get("r_max_m") == std::optional<std::string>("30000"));
    CHECK(r.units() == Units::scaled);
  }

  TEST_CASE("dataset container rejects foreign and newer files") {
    std::stringstream junk("NOPE....");
    CHECK_THROWS_WITH_AS(io::read_dataset(junk), "not an ATSC dataset file", io::FormatError);

    std::stringstream buf;
    io::write_dataset(buf, sample());
    std::string bytes = buf.str();
    bytes[4] = 9;
    std::stringstream newer(bytes);
    CHECK_THROWS_WITH_AS(io::read_dataset(newer), "unsupported dataset format version 9", io::FormatError);

    std::stringstream cut(buf.str().substr(0, 20));
    CHECK_THROWS_WITH_AS(io::read_dataset(cut), "truncated file", io::FormatError);
  }

  TEST_CASE("unknown trailing sections are skipped") {
    std::stringstream buf;
    io::write_dataset(buf, sample());
    io::BinaryWriter w(buf);
    w.bytes("XTRA");
    w.str("future payload");
    std::stringstream in(buf.str());
    CHECK(io::read_dataset(in).size() == 2);
  }

  TEST_CASE("record CSV round-trip and header check") {
    const auto dir = std::filesystem::temp_directory_path() / "atscc_io_test";
    std::filesystem::create_directories(dir);
    std::vector<RawRecord> recs{{"f1", 0.0, 37.5, 126.4, 900.0}, {"f1", 1.5, 37.51, 126.41, 880.5}};
    io::write_records_csv(dir / "r.csv", recs);
    auto back = io::read_records_csv(dir / "r.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].flight_id == "f1");
    CHECK(back[1].timestamp_s == 1.5);
    CHECK(back[1].lat_deg == 37.51);

    std::stringstream bad("id,t\nf,1\n");
    CHECK_THROWS_AS(io::parse_records_csv(bad), io::FormatError);
    std::stringstream short_row(std::string(io::kCsvHeader) + "\nf1,0,1\n");
    CHECK_THROWS_AS(io::parse_records_csv(short_row), io::FormatError);
  }

  TEST_CASE("key = value parsing") {
    std::stringstream in("# comment\nr_max_m = 120000\n\n[procedure]\nwaypoint = 1 2 3  # trailing\n");
    auto kv = io::parse_key_values(in);
    REQUIRE(kv.size() == 3);
    CHECK(kv[0] == std::pair<std::string, std::string>{"r_max_m", "120000"});
    CHECK(kv[1].first == "[procedure]");
    CHECK(kv[2].second == "1 2 3");
  }
}
