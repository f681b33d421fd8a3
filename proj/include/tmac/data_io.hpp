#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tmac/graph.hpp"

namespace tmac {

/// One modality of an on-disk event: center timestamps plus 32-bit features.
struct RecordBlock {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> timestamps_ms;
  std::vector<float> features;  ///< row-major (timestamps_ms.size() x dim)

  std::size_t count() const noexcept { return timestamps_ms.size(); }
  bool operator==(const RecordBlock&) const = default;
};

struct EventRecord {
  std::string event_id;
  std::vector<std::uint8_t> label;  ///< multi-hot, one entry per class
  RecordBlock audio;
  RecordBlock video;

  bool operator==(const EventRecord&) const = default;
};

inline constexpr std::uint32_t kRecordVersion = 1;
inline constexpr std::uint32_t kManifestVersion = 1;

/// Throws DataError if timestamps are not strictly increasing, features are
/// non-finite or mis-sized, or the label has no positive class.
void validate_record(const EventRecord& r);

/// Binary layout (little-endian): "TMEV", u32 version, u32-length-prefixed
/// UTF-8 id, u32 n_classes, label bitset (ceil(n/8) bytes, LSB first), then
/// for audio and video: u32 count, u32 dim, u32 timestamps[count],
/// f32 features[count * dim].
std::vector<std::uint8_t> encode_record(const EventRecord& r);
EventRecord decode_record(std::span<const std::uint8_t> bytes);

void write_record(const std::filesystem::path& path, const EventRecord& r);
EventRecord read_record(const std::filesystem::path& path);

/// 64-bit feature matrix for graph construction.
ModalityBlock to_modality_block(const RecordBlock& b);

EventGraph build_event_graph(const EventRecord& r, const GraphConfig& config);

enum class Split { train, eval, test };
Split parse_split(std::string_view name);
std::string_view to_string(Split s);

struct ManifestEntry {
  std::string event_id;
  Split split = Split::train;
  std::string path;  ///< relative to the manifest's directory

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::uint32_t version = kManifestVersion;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;
  std::size_t n_audio = 0;  ///< configured node counts for this dataset
  std::size_t n_video = 0;
  double train_fraction = 0.7;
  double eval_fraction = 0.1;
  double test_fraction = 0.2;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  ///< not serialized; set by read_manifest

  bool operator==(const DatasetManifest& o) const;
};

/// Text format: "TMAC-MANIFEST" line, key=value header lines, a blank line,
/// then one "id<TAB>split<TAB>path" line per event.
std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(std::string_view text);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Records of one split sorted by event id, each validated. Missing files are
/// all listed in one DataError.
std::vector<EventRecord> load_split(const DatasetManifest& m, Split split);

/// Parameters of the synthetic temporal dataset.
///
/// Every event carries the same bag of bursts: two audio bursts along fixed
/// directions A and B, and one video burst along direction V, all with the
/// same amplitude distribution. The class only decides their arrangement in time: whether
/// the audio motif is A-then-B or B-then-A, and the signed lag of the video
/// burst behind the audio motif center.
struct SyntheticSpec {
  std::size_t n_classes = 4;
  std::size_t events_per_class = 200;
  std::uint32_t duration_ms = 10000;
  std::uint32_t audio_window_ms = 960;
  std::uint32_t audio_stride_ms = 196;
  std::uint32_t video_chunk_ms = 250;
  std::uint32_t audio_dim = 128;
  std::uint32_t video_dim = 1024;
  std::size_t burst_width = 2;      ///< segments per burst
  std::size_t motif_gap = 2;        ///< audio segments between the two audio bursts
  std::uint32_t lag_ms = 750;       ///< base video lag magnitude
  std::size_t video_burst_width = 2;
  double burst_amplitude = 3.0;
  double amplitude_jitter = 0.0;     ///< each burst's amplitude scaled by U[1 - j, 1 + j]
  double noise_sigma = 0.1;
  std::size_t margin = 4;           ///< audio segments kept free at each clip edge
  /// Lone A, lone B and lone video bursts added to every event, independent
  /// of the class. They sit at least `distractor_gap_ms` away from the motif
  /// and from each other, so only the local ordering carries the label.
  bool distractors = true;
  std::uint32_t distractor_gap_ms = 1000;
  std::uint64_t seed = 1;

  std::size_t audio_segments() const;
  std::size_t video_segments() const;
};

/// Class c: audio motif reversed iff c is odd.
bool class_motif_reversed(std::size_t c);
/// Signed video lag of class c in ms: negative when the video burst precedes the audio motif.
std::int64_t class_lag_ms(const SyntheticSpec& spec, std::size_t c);

/// Writes records/<id>.tmev and manifest.txt under `out_dir`, with a per-class
/// stratified 70/10/20 split. Deterministic in spec.seed.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// The in-memory records generate_synthetic would write, in id order.
std::vector<EventRecord> synthesize_records(const SyntheticSpec& spec);

}  // namespace tmac
