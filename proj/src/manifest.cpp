#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "tmac/data_io.hpp"
#include "tmac/error.hpp"

namespace tmac {

namespace {

constexpr std::string_view kManifestMagic = "TMAC-MANIFEST";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view key) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("manifest: bad number for " + std::string(key) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view s, std::string_view key) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("manifest: bad count for " + std::string(key) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool has_forbidden(std::string_view s, std::string_view chars) {
  return s.find_first_of(chars) != std::string_view::npos;
}

}  // namespace

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "eval") return Split::eval;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, eval, test)");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::eval: return "eval";
    case Split::test: return "test";
  }
  return "?";
}

bool DatasetManifest::operator==(const DatasetManifest& o) const {
  return version == o.version && n_classes == o.n_classes && class_names == o.class_names &&
         n_audio == o.n_audio && n_video == o.n_video && train_fraction == o.train_fraction &&
         eval_fraction == o.eval_fraction && test_fraction == o.test_fraction &&
         entries == o.entries;
}

std::string encode_manifest(const DatasetManifest& m) {
  std::ostringstream out;
  out << kManifestMagic << '\n';
  out << "version=" << m.version << '\n';
  out << "n_classes=" << m.n_classes << '\n';
  out << "class_names=";
  for (std::size_t i = 0; i < m.class_names.size(); ++i) {
    if (has_forbidden(m.class_names[i], ",\n\r\t")) {
      throw DataError("class name '" + m.class_names[i] + "' contains a separator");
    }
    out << (i ? "," : "") << m.class_names[i];
  }
  out << '\n';
  out << "n_audio=" << m.n_audio << '\n';
  out << "n_video=" << m.n_video << '\n';
  out << "split_fractions=" << format_double(m.train_fraction) << ','
      << format_double(m.eval_fraction) << ',' << format_double(m.test_fraction) << '\n';
  out << "events=" << m.entries.size() << '\n';
  out << '\n';
  for (const auto& e : m.entries) {
    if (has_forbidden(e.event_id, "\t\n\r") || has_forbidden(e.path, "\t\n\r")) {
      throw DataError("manifest entry '" + e.event_id + "' contains a separator");
    }
    out << e.event_id << '\t' << to_string(e.split) << '\t' << e.path << '\n';
  }
  return out.str();
}

DatasetManifest decode_manifest(std::string_view text) {
  const auto lines = split_on(text, '\n');
  if (lines.empty() || lines[0] != kManifestMagic) throw DataError("not a manifest (missing TMAC-MANIFEST header)");
  std::map<std::string, std::string, std::less<>> header;
  std::size_t i = 1;
  for (; i < lines.size() && !lines[i].empty(); ++i) {
    const auto eq = lines[i].find('=');
    if (eq == std::string_view::npos) {
      throw DataError("manifest line " + std::to_string(i + 1) + ": expected key=value");
    }
    header.emplace(std::string(lines[i].substr(0, eq)), std::string(lines[i].substr(eq + 1)));
  }
  auto get = [&](std::string_view key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) throw DataError("manifest missing header key '" + std::string(key) + "'");
    return it->second;
  };
  DatasetManifest m;
  m.version = static_cast<std::uint32_t>(parse_count(get("version"), "version"));
  if (m.version != kManifestVersion) {
    throw DataError("unsupported manifest version " + std::to_string(m.version));
  }
  m.n_classes = parse_count(get("n_classes"), "n_classes");
  const std::string& names = get("class_names");
  if (!names.empty()) {
    for (auto n : split_on(names, ',')) m.class_names.emplace_back(n);
  }
  m.n_audio = parse_count(get("n_audio"), "n_audio");
  m.n_video = parse_count(get("n_video"), "n_video");
  const auto fr = split_on(get("split_fractions"), ',');
  if (fr.size() != 3) throw DataError("manifest split_fractions must have three values");
  m.train_fraction = parse_double(fr[0], "split_fractions");
  m.eval_fraction = parse_double(fr[1], "split_fractions");
  m.test_fraction = parse_double(fr[2], "split_fractions");
  const std::size_t events = parse_count(get("events"), "events");

  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw DataError("manifest line " + std::to_string(i + 1) + " is empty");
    }
    const auto fields = split_on(lines[i], '\t');
    if (fields.size() != 3) {
      throw DataError("manifest line " + std::to_string(i + 1) + ": expected id, split, path");
    }
    ManifestEntry e;
    e.event_id = std::string(fields[0]);
    try {
      e.split = parse_split(fields[1]);
    } catch (const ConfigError& err) {
      throw DataError("manifest line " + std::to_string(i + 1) + ": " + err.what());
    }
    e.path = std::string(fields[2]);
    m.entries.push_back(std::move(e));
  }
  if (m.entries.size() != events) {
    throw DataError("manifest declares " + std::to_string(events) + " events but lists " +
                    std::to_string(m.entries.size()));
  }
  if (m.class_names.size() != m.n_classes && !m.class_names.empty()) {
    throw DataError("manifest has " + std::to_string(m.class_names.size()) + " class names for " +
                    std::to_string(m.n_classes) + " classes");
  }
  std::vector<std::string> ids;
  for (const auto& e : m.entries) ids.push_back(e.event_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw DataError("manifest lists an event id more than once");
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << encode_manifest(m);
  if (!out) throw DataError("failed writing " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  DatasetManifest m = decode_manifest(buf.str());
  m.base_dir = path.parent_path();
  return m;
}

std::vector<EventRecord> load_split(const DatasetManifest& m, Split split) {
  std::vector<const ManifestEntry*> chosen;
  for (const auto& e : m.entries)
    if (e.split == split) chosen.push_back(&e);
  std::sort(chosen.begin(), chosen.end(),
            [](const ManifestEntry* a, const ManifestEntry* b) { return a->event_id < b->event_id; });
  std::string missing;
  for (const auto* e : chosen) {
    if (!std::filesystem::exists(m.base_dir / e->path)) missing += "\n  " + (m.base_dir / e->path).string();
  }
  if (!missing.empty()) throw DataError("missing record files:" + missing);
  std::vector<EventRecord> out;
  out.reserve(chosen.size());
  for (const auto* e : chosen) {
    EventRecord r = read_record(m.base_dir / e->path);
    if (r.event_id != e->event_id) {
      throw DataError("record " + e->path + " has id '" + r.event_id + "', manifest says '" +
                      e->event_id + "'");
    }
    if (r.label.size() != m.n_classes) {
      throw DataError("record '" + r.event_id + "' has " + std::to_string(r.label.size()) +
                      " classes, manifest " + std::to_string(m.n_classes));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace tmac
