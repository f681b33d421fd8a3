#pragma once

#include <string_view>
#include <vector>

#include "tmac/graph.hpp"

namespace tmac {

/// Which adjacency structures carry temporal decay weights.
enum class Variant {
  full,         ///< all three structures weighted
  non_tmg,      ///< no temporal weighting anywhere
  non_intra_t,  ///< intra-modal edges unweighted, cross-modal weighted
  non_inter_t,  ///< cross-modal edges unweighted, intra-modal weighted
};

/// Tags: "full", "non_tmg", "non_intraT", "non_interT". Throws ConfigError otherwise.
Variant parse_variant(std::string_view tag);
std::string_view to_string(Variant v);
inline constexpr Variant kAllVariants[] = {Variant::non_tmg, Variant::non_intra_t,
                                           Variant::non_inter_t, Variant::full};

struct WeightedNeighbor {
  NodeRef node;
  std::uint32_t edge_timestamp_ms = 0;
  double weight = 1.0;
};

struct WeightedRow {
  NodeRef source;
  std::vector<WeightedNeighbor> neighbors;
};

struct WeightedAdjacency {
  EdgeKind kind = EdgeKind::audio_audio;
  std::vector<WeightedRow> rows;
};

struct WeightedGraph {
  WeightedAdjacency audio;
  WeightedAdjacency video;
  WeightedAdjacency cross;
};

/// Hawkes-style decay over one neighborhood. With t_max/t_min the extreme edge
/// timestamps of this neighborhood, neighbor j gets
///   exp(-(t_max - t_j + 1) / (t_max - t_min + 1)),
/// so weights lie in [1/e, 1) and grow with recency. Differences are taken in
/// integer milliseconds, which makes the result exactly translation invariant.
/// Throws std::invalid_argument for an empty neighborhood.
std::vector<double> weight_neighborhood(const NeighborhoodView& nb);

/// Unit weights on every edge of `adj`.
WeightedAdjacency unit_weights(const Adjacency& adj);
/// Decay weights on every non-empty neighborhood of `adj`.
WeightedAdjacency decay_weights(const Adjacency& adj);

WeightedGraph weight_graph(const EventGraph& g, Variant variant);

}  // namespace tmac
