#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmac/tensor.hpp"

namespace tmac {

enum class Modality : std::uint8_t { audio, video };

std::string_view to_string(Modality m);

/// Node reference within one event graph: modality plus index in that modality.
struct NodeRef {
  Modality modality = Modality::audio;
  std::size_t index = 0;

  bool operator==(const NodeRef&) const = default;
};

std::string to_string(const NodeRef& n);

/// One audio or video segment. Features live row-aligned in the owning
/// graph's feature matrix for the modality.
struct SegmentNode {
  NodeRef ref;
  std::uint32_t timestamp_ms = 0;  ///< segment center
  bool padding = false;            ///< zero-feature filler, never in any neighborhood
};

struct Neighbor {
  NodeRef node;
  std::uint32_t edge_timestamp_ms = 0;

  bool operator==(const Neighbor&) const = default;
};

/// Neighbors of one source node, nearest first.
struct NeighborhoodView {
  NodeRef source;
  std::vector<Neighbor> neighbors;
};

enum class EdgeKind : std::uint8_t { audio_audio, video_video, audio_from_video };

std::string_view to_string(EdgeKind k);

/// One adjacency structure stored as per-source neighborhoods.
struct Adjacency {
  EdgeKind kind = EdgeKind::audio_audio;
  std::vector<NeighborhoodView> rows;  ///< one per source node, in node order
};

/// Input for one modality: timestamps (strictly increasing) and a feature
/// matrix with one row per segment.
struct ModalityBlock {
  std::vector<std::uint32_t> timestamps_ms;
  Tensor features;
};

struct GraphConfig {
  std::size_t m_audio = 8;   ///< intra-audio neighbors
  std::size_t m_video = 8;   ///< intra-video neighbors
  std::size_t m_cross = 8;   ///< video neighbors of each audio node
  std::size_t audio_dim = 128;
  std::size_t video_dim = 1024;
  /// Fixed node counts. Longer inputs are truncated; shorter ones are padded
  /// with zero-feature nodes that belong to no neighborhood.
  std::optional<std::size_t> n_audio;
  std::optional<std::size_t> n_video;
};

struct GraphMetadata {
  std::size_t requested_m_audio = 0, requested_m_video = 0, requested_m_cross = 0;
  std::size_t effective_m_audio = 0, effective_m_video = 0, effective_m_cross = 0;
  bool truncated_audio = false, truncated_video = false, truncated_cross = false;
  std::size_t real_audio = 0, real_video = 0;        ///< non-padding node counts
  std::size_t dropped_audio = 0, dropped_video = 0;  ///< segments cut to fit n_audio/n_video
};

/// One acoustic event as a temporal multi-modal graph.
struct EventGraph {
  std::string event_id;
  std::vector<SegmentNode> audio_nodes;
  std::vector<SegmentNode> video_nodes;
  Tensor audio_features;  ///< (audio_nodes.size() x audio_dim)
  Tensor video_features;  ///< (video_nodes.size() x video_dim)
  Adjacency audio_adj{EdgeKind::audio_audio, {}};
  Adjacency video_adj{EdgeKind::video_video, {}};
  Adjacency cross_adj{EdgeKind::audio_from_video, {}};
  std::vector<std::uint8_t> label;  ///< multi-hot over classes
  GraphMetadata meta;

  const std::vector<SegmentNode>& nodes(Modality m) const {
    return m == Modality::audio ? audio_nodes : video_nodes;
  }
};

/// Indices (into `candidates`) of the `m` timestamps nearest to `t`, nearest
/// first. Ties go to the earlier timestamp, then the lower index. `exclude`
/// removes one candidate (the source node itself for intra-modal search).
/// `candidates` must be strictly increasing.
std::vector<std::size_t> nearest_by_time(std::span<const std::uint32_t> candidates,
                                         std::uint32_t t, std::size_t m,
                                         std::optional<std::size_t> exclude);

/// Throws DataError for an empty modality, non-increasing timestamps or
/// feature/timestamp count mismatch, ConfigError for a zero neighbor count.
EventGraph build_event_graph(const ModalityBlock& audio, const ModalityBlock& video,
                             std::vector<std::uint8_t> label, const GraphConfig& config,
                             std::string event_id = {});

struct Violation {
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

/// Checks every structural invariant of an EventGraph; never throws for
/// malformed graphs, failures are listed in the report.
ValidationReport validate_graph(const EventGraph& g);

}  // namespace tmac
