#include "tmac/temporal_weight.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

Variant parse_variant(std::string_view tag) {
  if (tag == "full") return Variant::full;
  if (tag == "non_tmg") return Variant::non_tmg;
  if (tag == "non_intraT") return Variant::non_intra_t;
  if (tag == "non_interT") return Variant::non_inter_t;
  throw ConfigError("unknown variant '" + std::string(tag) +
                    "' (expected full, non_tmg, non_intraT, non_interT)");
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::non_tmg: return "non_tmg";
    case Variant::non_intra_t: return "non_intraT";
    case Variant::non_inter_t: return "non_interT";
  }
  return "?";
}

std::vector<double> weight_neighborhood(const NeighborhoodView& nb) {
  if (nb.neighbors.empty()) throw std::invalid_argument("weight_neighborhood: empty neighborhood");
  auto [lo, hi] = std::minmax_element(
      nb.neighbors.begin(), nb.neighbors.end(),
      [](const Neighbor& a, const Neighbor& b) { return a.edge_timestamp_ms < b.edge_timestamp_ms; });
  const std::int64_t t_max = hi->edge_timestamp_ms;
  const std::int64_t t_min = lo->edge_timestamp_ms;
  const double span = static_cast<double>(t_max - t_min + 1);
  std::vector<double> w;
  w.reserve(nb.neighbors.size());
  for (const auto& n : nb.neighbors) {
    const double age = static_cast<double>(t_max - static_cast<std::int64_t>(n.edge_timestamp_ms) + 1);
    w.push_back(std::exp(-age / span));
  }
  return w;
}

WeightedAdjacency unit_weights(const Adjacency& adj) {
  WeightedAdjacency out{adj.kind, {}};
  out.rows.reserve(adj.rows.size());
  for (const auto& row : adj.rows) {
    WeightedRow wr{row.source, {}};
    for (const auto& n : row.neighbors) wr.neighbors.push_back({n.node, n.edge_timestamp_ms, 1.0});
    out.rows.push_back(std::move(wr));
  }
  return out;
}

WeightedAdjacency decay_weights(const Adjacency& adj) {
  WeightedAdjacency out{adj.kind, {}};
  out.rows.reserve(adj.rows.size());
  for (const auto& row : adj.rows) {
    WeightedRow wr{row.source, {}};
    if (!row.neighbors.empty()) {
      const auto w = weight_neighborhood(row);
      for (std::size_t k = 0; k < row.neighbors.size(); ++k) {
        wr.neighbors.push_back({row.neighbors[k].node, row.neighbors[k].edge_timestamp_ms, w[k]});
      }
    }
    out.rows.push_back(std::move(wr));
  }
  return out;
}

WeightedGraph weight_graph(const EventGraph& g, Variant variant) {
  const bool intra = variant == Variant::full || variant == Variant::non_inter_t;
  const bool inter = variant == Variant::full || variant == Variant::non_intra_t;
  WeightedGraph out;
  out.audio = intra ? decay_weights(g.audio_adj) : unit_weights(g.audio_adj);
  out.video = intra ? decay_weights(g.video_adj) : unit_weights(g.video_adj);
  out.cross = inter ? decay_weights(g.cross_adj) : unit_weights(g.cross_adj);
  return out;
}

}  // namespace tmac
