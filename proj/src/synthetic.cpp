#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "tmac/data_io.hpp"
#include "tmac/error.hpp"

namespace tmac {

std::size_t SyntheticSpec::audio_segments() const {
  if (audio_stride_ms == 0 || duration_ms < audio_window_ms) return 0;
  return (duration_ms - audio_window_ms) / audio_stride_ms + 1;
}

std::size_t SyntheticSpec::video_segments() const {
  return video_chunk_ms == 0 ? 0 : duration_ms / video_chunk_ms;
}

bool class_motif_reversed(std::size_t c) { return c % 2 == 1; }

std::int64_t class_lag_ms(const SyntheticSpec& spec, std::size_t c) {
  const std::int64_t sign = (c / 2) % 2 == 0 ? -1 : 1;
  const std::int64_t magnitude = static_cast<std::int64_t>(spec.lag_ms) * static_cast<std::int64_t>(1 + c / 4);
  return sign * magnitude;
}

namespace {

std::vector<double> unit_direction(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

void check_spec(const SyntheticSpec& s) {
  if (s.n_classes == 0 || s.events_per_class == 0) throw ConfigError("synthetic spec needs classes and events");
  if (s.audio_segments() == 0) throw ConfigError("audio window/stride/duration produce zero segments");
  if (s.video_segments() == 0) throw ConfigError("video chunk/duration produce zero segments");
  if (s.audio_dim == 0 || s.video_dim == 0) throw ConfigError("feature dimensions must be >= 1");
  if (s.burst_width == 0 || s.video_burst_width == 0) throw ConfigError("burst widths must be >= 1");
  const std::size_t motif = 2 * s.burst_width + s.motif_gap;
  if (motif + 2 * s.margin > s.audio_segments()) {
    throw ConfigError("audio motif and margins do not fit in " + std::to_string(s.audio_segments()) +
                      " audio segments");
  }
  if (s.video_burst_width > s.video_segments()) throw ConfigError("video burst wider than the clip");
  if (s.noise_sigma < 0) throw ConfigError("noise sigma must be >= 0");
  if (s.amplitude_jitter < 0 || s.amplitude_jitter >= 1) throw ConfigError("amplitude jitter must be in [0, 1)");
}

struct Span {
  std::uint32_t lo, hi;
};

std::uint32_t gap_between(const Span& x, const Span& y) {
  if (x.hi < y.lo) return y.lo - x.hi;
  if (y.hi < x.lo) return x.lo - y.hi;
  return 0;
}

struct Directions {
  std::vector<double> a, b, v;
};

EventRecord make_event(const SyntheticSpec& spec, const Directions& dirs, std::size_t cls,
                       std::size_t index) {
  std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(cls),
                    static_cast<std::uint64_t>(index), std::uint64_t{0x5EED}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);

  const std::size_t n_a = spec.audio_segments();
  const std::size_t n_v = spec.video_segments();
  EventRecord r;
  char id[64];
  std::snprintf(id, sizeof id, "event_%06zu", cls * spec.events_per_class + index);
  r.event_id = id;
  r.label.assign(spec.n_classes, 0);
  r.label[cls] = 1;

  r.audio.dim = spec.audio_dim;
  r.video.dim = spec.video_dim;
  for (std::size_t k = 0; k < n_a; ++k)
    r.audio.timestamps_ms.push_back(static_cast<std::uint32_t>(k * spec.audio_stride_ms + spec.audio_window_ms / 2));
  for (std::size_t k = 0; k < n_v; ++k)
    r.video.timestamps_ms.push_back(static_cast<std::uint32_t>(k * spec.video_chunk_ms + spec.video_chunk_ms / 2));

  const std::size_t motif = 2 * spec.burst_width + spec.motif_gap;
  std::uniform_int_distribution<std::size_t> start_dist(spec.margin, n_a - spec.margin - motif);
  const std::size_t start = start_dist(rng);

  std::uniform_real_distribution<double> jitter(1.0 - spec.amplitude_jitter, 1.0 + spec.amplitude_jitter);
  const double amp_a = spec.burst_amplitude * jitter(rng);
  const double amp_b = spec.burst_amplitude * jitter(rng);
  const double amp_v = spec.burst_amplitude * jitter(rng);

  const bool reversed = class_motif_reversed(cls);
  const double motif_center =
      0.5 * (static_cast<double>(r.audio.timestamps_ms[start]) +
             static_cast<double>(r.audio.timestamps_ms[start + motif - 1]));
  const double video_center = motif_center + static_cast<double>(class_lag_ms(spec, cls));
  const double first = (video_center - spec.video_chunk_ms / 2.0) / spec.video_chunk_ms -
                       (static_cast<double>(spec.video_burst_width) - 1.0) / 2.0;
  const auto max_first = static_cast<double>(n_v - spec.video_burst_width);
  const auto video_start = static_cast<std::size_t>(std::clamp(std::round(first), 0.0, max_first));

  std::vector<const std::vector<double>*> audio_dir(n_a, nullptr);
  std::vector<bool> video_burst(n_v, false);
  for (std::size_t k = 0; k < spec.burst_width; ++k) {
    audio_dir[start + k] = reversed ? &dirs.b : &dirs.a;
    audio_dir[start + spec.burst_width + spec.motif_gap + k] = reversed ? &dirs.a : &dirs.b;
  }
  for (std::size_t k = 0; k < spec.video_burst_width; ++k) video_burst[video_start + k] = true;

  if (spec.distractors) {
    const auto& ta = r.audio.timestamps_ms;
    const auto& tv = r.video.timestamps_ms;
    const std::size_t bw = spec.burst_width, vw = spec.video_burst_width;
    Span motif_span{std::min(ta[start], tv[video_start]),
                    std::max(ta[start + motif - 1], tv[video_start + vw - 1])};
    std::uniform_int_distribution<std::size_t> audio_pos(spec.margin, n_a - spec.margin - bw);
    std::uniform_int_distribution<std::size_t> video_pos(0, n_v - vw);
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      const std::size_t la = audio_pos(rng), lb = audio_pos(rng), lv = video_pos(rng);
      const Span spans[4] = {motif_span, {ta[la], ta[la + bw - 1]}, {ta[lb], ta[lb + bw - 1]},
                             {tv[lv], tv[lv + vw - 1]}};
      placed = true;
      for (int i = 0; i < 4 && placed; ++i)
        for (int j = i + 1; j < 4 && placed; ++j) placed = gap_between(spans[i], spans[j]) >= spec.distractor_gap_ms;
      if (!placed) continue;
      for (std::size_t k = 0; k < bw; ++k) {
        audio_dir[la + k] = &dirs.a;
        audio_dir[lb + k] = &dirs.b;
      }
      for (std::size_t k = 0; k < vw; ++k) video_burst[lv + k] = true;
    }
    if (!placed) throw ConfigError("distractor bursts do not fit " + std::to_string(spec.distractor_gap_ms) +
                                   " ms apart in a " + std::to_string(spec.duration_ms) + " ms clip");
  }

  r.audio.features.resize(n_a * spec.audio_dim);
  for (std::size_t k = 0; k < n_a; ++k) {
    for (std::size_t d = 0; d < spec.audio_dim; ++d) {
      double x = noise(rng);
      if (audio_dir[k]) x += (audio_dir[k] == &dirs.a ? amp_a : amp_b) * (*audio_dir[k])[d];
      r.audio.features[k * spec.audio_dim + d] = static_cast<float>(x);
    }
  }
  r.video.features.resize(n_v * spec.video_dim);
  for (std::size_t k = 0; k < n_v; ++k) {
    const bool burst = video_burst[k];
    for (std::size_t d = 0; d < spec.video_dim; ++d) {
      double x = noise(rng);
      if (burst) x += amp_v * dirs.v[d];
      r.video.features[k * spec.video_dim + d] = static_cast<float>(x);
    }
  }
  return r;
}

Directions make_directions(const SyntheticSpec& spec) {
  std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), std::uint64_t{0xD1EC}};
  std::mt19937_64 rng(seq);
  Directions d;
  d.a = unit_direction(rng, spec.audio_dim);
  d.b = unit_direction(rng, spec.audio_dim);
  d.v = unit_direction(rng, spec.video_dim);
  return d;
}

}  // namespace

std::vector<EventRecord> synthesize_records(const SyntheticSpec& spec) {
  check_spec(spec);
  const Directions dirs = make_directions(spec);
  std::vector<EventRecord> out;
  out.reserve(spec.n_classes * spec.events_per_class);
  for (std::size_t c = 0; c < spec.n_classes; ++c)
    for (std::size_t i = 0; i < spec.events_per_class; ++i) out.push_back(make_event(spec, dirs, c, i));
  return out;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  const auto records = synthesize_records(spec);
  std::filesystem::create_directories(out_dir / "records");

  DatasetManifest m;
  m.n_classes = spec.n_classes;
  for (std::size_t c = 0; c < spec.n_classes; ++c) m.class_names.push_back("class_" + std::to_string(c));
  m.n_audio = spec.audio_segments();
  m.n_video = spec.video_segments();

  std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), std::uint64_t{0x5917}};
  std::mt19937_64 rng(seq);
  const std::size_t per = spec.events_per_class;
  const auto n_train = static_cast<std::size_t>(std::llround(m.train_fraction * static_cast<double>(per)));
  const auto n_eval = static_cast<std::size_t>(std::llround(m.eval_fraction * static_cast<double>(per)));
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    std::vector<std::size_t> order(per);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split(per, Split::test);
    for (std::size_t k = 0; k < per; ++k) {
      split[order[k]] = k < n_train ? Split::train : (k < n_train + n_eval ? Split::eval : Split::test);
    }
    for (std::size_t i = 0; i < per; ++i) {
      const EventRecord& r = records[c * per + i];
      const std::string rel = "records/" + r.event_id + ".tmev";
      write_record(out_dir / rel, r);
      m.entries.push_back({r.event_id, split[i], rel});
    }
  }
  write_manifest(out_dir / "manifest.txt", m);
  m.base_dir = out_dir;
  return m;
}

}  // namespace tmac
