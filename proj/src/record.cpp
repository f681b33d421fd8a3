#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "tmac/data_io.hpp"
#include "tmac/error.hpp"

namespace tmac {

namespace {

constexpr char kRecordMagic[4] = {'T', 'M', 'E', 'V'};

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

  std::size_t offset() const noexcept { return pos_; }

  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw DataError(std::string("truncated record: reading ") + what + " at byte offset " +
                      std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint8_t byte(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_block(const RecordBlock& b, const std::string& name, const std::string& id) {
  if (b.features.size() != b.timestamps_ms.size() * static_cast<std::size_t>(b.dim)) {
    throw DataError("record '" + id + "': " + name + " feature count " +
                    std::to_string(b.features.size()) + " != " +
                    std::to_string(b.timestamps_ms.size()) + " x " + std::to_string(b.dim));
  }
  for (std::size_t i = 1; i < b.timestamps_ms.size(); ++i) {
    if (b.timestamps_ms[i] <= b.timestamps_ms[i - 1]) {
      throw DataError("record '" + id + "': " + name + " timestamps not strictly increasing at segment " +
                      std::to_string(i));
    }
  }
  for (float f : b.features) {
    if (!std::isfinite(f)) throw DataError("record '" + id + "': non-finite " + name + " feature");
  }
}

void put_block(ByteWriter& w, const RecordBlock& b) {
  w.u32(static_cast<std::uint32_t>(b.timestamps_ms.size()));
  w.u32(b.dim);
  for (std::uint32_t t : b.timestamps_ms) w.u32(t);
  for (float f : b.features) w.f32(f);
}

RecordBlock get_block(ByteReader& r, const char* name) {
  RecordBlock b;
  const std::uint32_t count = r.u32("segment count");
  b.dim = r.u32("feature dimension");
  r.need(static_cast<std::size_t>(count) * 4, "timestamps");
  b.timestamps_ms.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t t = r.u32("timestamp");
    if (i > 0 && t <= b.timestamps_ms.back()) {
      throw DataError(std::string(name) + " timestamps not strictly increasing at byte offset " +
                      std::to_string(at) + " (segment " + std::to_string(i) + ")");
    }
    b.timestamps_ms.push_back(t);
  }
  const std::size_t n = static_cast<std::size_t>(count) * b.dim;
  r.need(n * 4, "features");
  b.features.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const float f = r.f32("feature");
    if (!std::isfinite(f)) {
      throw DataError(std::string("non-finite ") + name + " feature at byte offset " +
                      std::to_string(at));
    }
    b.features.push_back(f);
  }
  return b;
}

}  // namespace

void validate_record(const EventRecord& r) {
  check_block(r.audio, "audio", r.event_id);
  check_block(r.video, "video", r.event_id);
  bool any = false;
  for (auto v : r.label) {
    if (v > 1) throw DataError("record '" + r.event_id + "': label entries must be 0 or 1");
    any = any || v == 1;
  }
  if (!any) throw DataError("record '" + r.event_id + "': label has no positive class");
}

std::vector<std::uint8_t> encode_record(const EventRecord& r) {
  validate_record(r);
  ByteWriter w;
  w.raw(kRecordMagic, 4);
  w.u32(kRecordVersion);
  w.str(r.event_id);
  w.u32(static_cast<std::uint32_t>(r.label.size()));
  for (std::size_t byte = 0; byte < (r.label.size() + 7) / 8; ++byte) {
    std::uint8_t bits = 0;
    for (std::size_t k = 0; k < 8 && byte * 8 + k < r.label.size(); ++k) {
      if (r.label[byte * 8 + k]) bits |= static_cast<std::uint8_t>(1u << k);
    }
    w.raw(&bits, 1);
  }
  put_block(w, r.audio);
  put_block(w, r.video);
  return w.take();
}

EventRecord decode_record(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes);
  rd.need(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (rd.byte("magic") != static_cast<std::uint8_t>(kRecordMagic[i])) {
      throw DataError("bad record magic (expected TMEV)");
    }
  }
  const std::uint32_t version = rd.u32("version");
  if (version != kRecordVersion) {
    throw DataError("unsupported record version " + std::to_string(version));
  }
  EventRecord r;
  r.event_id = rd.str("event id");
  const std::uint32_t n_classes = rd.u32("class count");
  r.label.assign(n_classes, 0);
  for (std::size_t byte = 0; byte < (n_classes + 7u) / 8; ++byte) {
    const std::uint8_t bits = rd.byte("label bitset");
    for (std::size_t k = 0; k < 8 && byte * 8 + k < n_classes; ++k) {
      r.label[byte * 8 + k] = (bits >> k) & 1u;
    }
  }
  r.audio = get_block(rd, "audio");
  r.video = get_block(rd, "video");
  if (rd.offset() != bytes.size()) {
    throw DataError("trailing bytes after record at offset " + std::to_string(rd.offset()));
  }
  validate_record(r);
  return r;
}

void write_record(const std::filesystem::path& path, const EventRecord& r) {
  const auto bytes = encode_record(r);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

EventRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open record " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_record(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

ModalityBlock to_modality_block(const RecordBlock& b) {
  ModalityBlock m;
  m.timestamps_ms = b.timestamps_ms;
  std::vector<double> data(b.features.begin(), b.features.end());
  m.features = Tensor(b.count(), b.dim, std::move(data));
  return m;
}

EventGraph build_event_graph(const EventRecord& r, const GraphConfig& config) {
  return build_event_graph(to_modality_block(r.audio), to_modality_block(r.video), r.label, config,
                           r.event_id);
}

}  // namespace tmac
