#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "oracles.hpp"
#include "tmac/data_io.hpp"
#include "tmac/error.hpp"

using namespace tmac;

namespace {

const std::filesystem::path kScratch = TMAC_TEST_SCRATCH;

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SyntheticSpec small_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.events_per_class = 50;
  s.audio_dim = 6;
  s.video_dim = 5;
  s.seed = seed;
  return s;
}

std::size_t audio_ts_offset(const EventRecord& r) {
  return 4 + 4 + 4 + r.event_id.size() + 4 + (r.label.size() + 7) / 8 + 8;
}

}  // namespace

TEST_CASE("records round-trip bit-exactly") {
  std::mt19937_64 rng(77);
  const auto dir = kScratch / "records";
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < 100; ++i) {
    const EventRecord r = oracle::random_record(rng, i);
    const auto bytes = encode_record(r);
    CHECK(decode_record(bytes) == r);
    const auto path = dir / ("r" + std::to_string(i) + ".tmev");
    write_record(path, r);
    CHECK(read_record(path) == r);
    CHECK(encode_record(read_record(path)) == bytes);
  }
}

TEST_CASE("corrupt records are rejected with positions") {
  std::mt19937_64 rng(1);
  EventRecord r = oracle::random_record(rng, 1);
  while (r.audio.count() < 2) r = oracle::random_record(rng, 1);
  const auto good = encode_record(r);

  SUBCASE("decreasing timestamps") {
    auto bytes = good;
    const std::size_t off = audio_ts_offset(r);
    std::swap_ranges(bytes.begin() + off, bytes.begin() + off + 4, bytes.begin() + off + 4);
    try {
      decode_record(bytes);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("offset " + std::to_string(off + 4)) != std::string::npos);
    }
  }
  SUBCASE("empty label") {
    auto bytes = good;
    const std::size_t label_at = 4 + 4 + 4 + r.event_id.size() + 4;
    for (std::size_t k = 0; k < (r.label.size() + 7) / 8; ++k) bytes[label_at + k] = 0;
    CHECK_THROWS_AS(decode_record(bytes), DataError);
    EventRecord empty = r;
    std::fill(empty.label.begin(), empty.label.end(), 0);
    CHECK_THROWS_AS(validate_record(empty), DataError);
  }
  SUBCASE("bad magic, truncation and trailing bytes") {
    auto bytes = good;
    bytes[1] = 'X';
    CHECK_THROWS_AS(decode_record(bytes), DataError);
    CHECK_THROWS_AS(decode_record(std::span(good).first(good.size() - 1)), DataError);
    auto extra = good;
    extra.push_back(7);
    CHECK_THROWS_AS(decode_record(extra), DataError);
  }
}

TEST_CASE("manifests round-trip") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    DatasetManifest m;
    m.n_classes = 1 + rng() % 6;
    for (std::size_t c = 0; c < m.n_classes; ++c) m.class_names.push_back("c" + std::to_string(c) + "_\xe2\x99\xaa");
    m.n_audio = rng() % 60;
    m.n_video = rng() % 120;
    const std::size_t n = rng() % 30;
    for (std::size_t i = 0; i < n; ++i)
      m.entries.push_back({"id" + std::to_string(i), static_cast<Split>(rng() % 3), "records/id" + std::to_string(i) + ".tmev"});
    const auto text = encode_manifest(m);
    CHECK(decode_manifest(text) == m);
    CHECK(encode_manifest(decode_manifest(text)) == text);
  }
  CHECK_THROWS_AS(decode_manifest("not a manifest\n"), DataError);
}

TEST_CASE("split names") {
  CHECK(parse_split("train") == Split::train);
  CHECK(parse_split("eval") == Split::eval);
  CHECK(parse_split("test") == Split::test);
  CHECK_THROWS_AS(parse_split("dev"), ConfigError);
}

TEST_CASE("synthetic dataset layout and splits") {
  const auto dir = kScratch / "synthetic_a";
  std::filesystem::remove_all(dir);
  const auto m = generate_synthetic(small_spec(9), dir);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "records")) files += e.is_regular_file() ? 1 : 0;
  CHECK(files == 200);
  CHECK(std::filesystem::exists(dir / "manifest.txt"));

  const auto read = read_manifest(dir / "manifest.txt");
  const auto train = load_split(read, Split::train);
  const auto eval = load_split(read, Split::eval);
  const auto test = load_split(read, Split::test);
  CHECK(train.size() == 140);
  CHECK(eval.size() == 20);
  CHECK(test.size() == 40);
  std::set<std::string> ids;
  for (const auto* s : {&train, &eval, &test})
    for (const auto& r : *s) ids.insert(r.event_id);
  CHECK(ids.size() == 200);
  for (std::size_t i = 1; i < train.size(); ++i) CHECK(train[i - 1].event_id < train[i].event_id);
  CHECK(load_split(read, Split::train) == train);
  for (const auto& r : train) CHECK(std::count(r.label.begin(), r.label.end(), 1) == 1);
  CHECK(read.n_audio == small_spec(9).audio_segments());
  CHECK(read.n_video == small_spec(9).video_segments());
}

TEST_CASE("same seed gives a byte-identical dataset") {
  const auto a = kScratch / "synthetic_b1", b = kScratch / "synthetic_b2";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  const auto m = generate_synthetic(small_spec(4), a);
  generate_synthetic(small_spec(4), b);
  CHECK(file_bytes(a / "manifest.txt") == file_bytes(b / "manifest.txt"));
  for (const auto& e : m.entries) CHECK(file_bytes(a / e.path) == file_bytes(b / e.path));
  CHECK(!(synthesize_records(small_spec(4)) == synthesize_records(small_spec(5))));
}

TEST_CASE("missing record files are all listed") {
  const auto dir = kScratch / "synthetic_c";
  std::filesystem::remove_all(dir);
  const auto m = generate_synthetic(small_spec(2), dir);
  std::vector<std::string> gone;
  for (const auto& e : m.entries) {
    if (e.split != Split::test) continue;
    std::filesystem::remove(dir / e.path);
    gone.push_back(e.path);
    if (gone.size() == 2) break;
  }
  try {
    load_split(read_manifest(dir / "manifest.txt"), Split::test);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    for (const auto& p : gone) CHECK(std::string(e.what()).find(p) != std::string::npos);
  }
}

TEST_CASE("class signal lives only in timing") {
  const auto records = synthesize_records(small_spec(6));
  std::vector<EventRecord> train, test;
  for (std::size_t i = 0; i < records.size(); ++i) (i % 5 == 0 ? test : train).push_back(records[i]);
  CHECK(oracle::centroid_accuracy(train, test) <= 0.25 + 0.1);

  SyntheticSpec s = small_spec(6);
  CHECK(class_lag_ms(s, 0) == -750);
  CHECK(class_lag_ms(s, 2) == 750);
  CHECK(class_motif_reversed(1));
  CHECK(!class_motif_reversed(2));
}

TEST_CASE("synthetic spec errors") {
  SyntheticSpec s = small_spec(1);
  s.audio_stride_ms = 0;
  CHECK_THROWS_AS(synthesize_records(s), ConfigError);
  s = small_spec(1);
  s.duration_ms = 500;
  CHECK_THROWS_AS(synthesize_records(s), ConfigError);
  s = small_spec(1);
  s.distractor_gap_ms = 5000;
  CHECK_THROWS_AS(synthesize_records(s), ConfigError);
}
