#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "tmac/error.hpp"
#include "tmac/trainer.hpp"

namespace tmac {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'A', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_str(std::vector<std::uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) {
      throw DataError(std::string("truncated checkpoint: reading ") + what + " at byte offset " +
                      std::to_string(pos));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

std::string exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::size_t count_of(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint missing key '" + key + "'");
  std::size_t v = 0;
  const auto& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("checkpoint: bad value for '" + key + "'");
  }
  return v;
}

void put_tensor(std::vector<std::uint8_t>& out, const std::string& name, const Tensor& t) {
  put_str(out, name);
  put_u32(out, static_cast<std::uint32_t>(t.rows()));
  put_u32(out, static_cast<std::uint32_t>(t.cols()));
  for (double x : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const auto& s = c.params.shape;
  std::map<std::string, std::string> kv = to_key_values(c.config);
  kv["shape.audio_dim"] = std::to_string(s.audio_dim);
  kv["shape.video_dim"] = std::to_string(s.video_dim);
  kv["shape.hidden"] = std::to_string(s.hidden);
  kv["shape.layers"] = std::to_string(s.layers);
  kv["shape.n_audio"] = std::to_string(s.n_audio);
  kv["shape.n_video"] = std::to_string(s.n_video);
  kv["shape.n_classes"] = std::to_string(s.n_classes);
  kv["iteration"] = std::to_string(c.iteration);
  kv["best_eval_map"] = exact(c.best_eval_map);
  kv["adam_step"] = std::to_string(c.params.adam.step);
  if (c.rng_state.find('\n') != std::string::npos) throw DataError("rng state contains a newline");
  kv["rng_state"] = c.rng_state;

  std::string text;
  for (const auto& [k, v] : kv) text += k + "=" + v + "\n";

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);
  put_str(out, text);

  const auto named = named_parameters(c.params);
  const bool has_moments = c.params.adam.first_moment.size() == named.size() &&
                           c.params.adam.second_moment.size() == named.size();
  put_u32(out, static_cast<std::uint32_t>(named.size() * (has_moments ? 3 : 1)));
  for (const auto& np : named) put_tensor(out, np.name, *np.tensor);
  if (has_moments) {
    for (std::size_t i = 0; i < named.size(); ++i)
      put_tensor(out, "adam.m/" + named[i].name, c.params.adam.first_moment[i]);
    for (std::size_t i = 0; i < named.size(); ++i)
      put_tensor(out, "adam.v/" + named[i].name, c.params.adam.second_moment[i]);
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader rd{bytes};
  rd.need(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kMagic[i])) throw DataError("bad checkpoint magic (expected TMAC)");
  }
  rd.pos = 4;
  const std::uint32_t version = rd.u32("version");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, std::string> kv;
  {
    std::istringstream lines(rd.str("header"));
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw DataError("checkpoint header line without '='");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }

  Checkpoint c;
  try {
    c.config = train_config_from(kv);
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  ModelShape shape;
  shape.audio_dim = count_of(kv, "shape.audio_dim");
  shape.video_dim = count_of(kv, "shape.video_dim");
  shape.hidden = count_of(kv, "shape.hidden");
  shape.layers = count_of(kv, "shape.layers");
  shape.n_audio = count_of(kv, "shape.n_audio");
  shape.n_video = count_of(kv, "shape.n_video");
  shape.n_classes = count_of(kv, "shape.n_classes");
  c.iteration = count_of(kv, "iteration");
  c.params = make_model(shape);
  c.params.adam.step = count_of(kv, "adam_step");
  {
    const std::string& s = kv.count("best_eval_map") ? kv.at("best_eval_map") : throw DataError("checkpoint missing key 'best_eval_map'");
    auto res = std::from_chars(s.data(), s.data() + s.size(), c.best_eval_map);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw DataError("checkpoint: bad best_eval_map");
  }
  c.rng_state = kv.count("rng_state") ? kv.at("rng_state") : std::string();

  auto named = named_parameters(c.params);
  std::map<std::string, Tensor*> slots;
  for (std::size_t i = 0; i < named.size(); ++i) {
    slots[named[i].name] = named[i].tensor;
    slots["adam.m/" + named[i].name] = &c.params.adam.first_moment[i];
    slots["adam.v/" + named[i].name] = &c.params.adam.second_moment[i];
  }
  std::map<std::string, bool> seen;
  const std::uint32_t records = rd.u32("record count");
  for (std::uint32_t r = 0; r < records; ++r) {
    const std::string name = rd.str("tensor name");
    const std::uint32_t rows = rd.u32("rows");
    const std::uint32_t cols = rd.u32("cols");
    auto it = slots.find(name);
    if (it == slots.end()) throw DataError("checkpoint has unexpected tensor '" + name + "'");
    Tensor& t = *it->second;
    if (t.rows() != rows || t.cols() != cols) {
      throw DataError("checkpoint tensor '" + name + "' is " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " + t.shape_string());
    }
    if (seen[name]) throw DataError("checkpoint repeats tensor '" + name + "'");
    seen[name] = true;
    rd.need(static_cast<std::size_t>(rows) * cols * 8, "tensor values");
    for (double& x : t.data()) x = std::bit_cast<double>(rd.u64("value"));
  }
  for (const auto& np : named) {
    if (!seen[np.name]) throw DataError("checkpoint is missing tensor '" + np.name + "'");
  }
  if (rd.pos != bytes.size()) throw DataError("trailing bytes after checkpoint at offset " + std::to_string(rd.pos));
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const auto bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace tmac
