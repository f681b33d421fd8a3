#include "tmac/graph.hpp"

#include <algorithm>
#include <set>

#include "tmac/error.hpp"

namespace tmac {

std::string_view to_string(Modality m) { return m == Modality::audio ? "audio" : "video"; }

std::string to_string(const NodeRef& n) {
  return std::string(to_string(n.modality)) + ":" + std::to_string(n.index);
}

std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::audio_audio: return "audio";
    case EdgeKind::video_video: return "video";
    case EdgeKind::audio_from_video: return "cross";
  }
  return "?";
}

std::vector<std::size_t> nearest_by_time(std::span<const std::uint32_t> candidates,
                                         std::uint32_t t, std::size_t m,
                                         std::optional<std::size_t> exclude) {
  std::vector<std::size_t> out;
  if (candidates.empty() || m == 0) return out;
  // right = first candidate with timestamp >= t; expand outward from there.
  auto it = std::lower_bound(candidates.begin(), candidates.end(), t);
  std::ptrdiff_t left = (it - candidates.begin()) - 1;
  std::size_t right = static_cast<std::size_t>(it - candidates.begin());
  const auto n = candidates.size();
  auto skip = [&](std::size_t i) { return exclude && *exclude == i; };
  while (out.size() < m) {
    while (left >= 0 && skip(static_cast<std::size_t>(left))) --left;
    while (right < n && skip(right)) ++right;
    const bool has_left = left >= 0;
    const bool has_right = right < n;
    if (!has_left && !has_right) break;
    bool take_left = has_left;
    if (has_left && has_right) {
      const std::int64_t dl =
          static_cast<std::int64_t>(t) - static_cast<std::int64_t>(candidates[left]);
      const std::int64_t dr =
          static_cast<std::int64_t>(candidates[right]) - static_cast<std::int64_t>(t);
      take_left = dl <= dr;  // tie -> earlier timestamp
    }
    if (take_left) {
      out.push_back(static_cast<std::size_t>(left));
      --left;
    } else {
      out.push_back(right);
      ++right;
    }
  }
  return out;
}

namespace {

void check_block(const ModalityBlock& block, Modality m, std::size_t dim) {
  const auto name = std::string(to_string(m));
  if (block.timestamps_ms.empty()) throw DataError("empty " + name + " modality");
  if (block.features.rows() != block.timestamps_ms.size()) {
    throw DataError(name + " block has " + std::to_string(block.timestamps_ms.size()) +
                    " timestamps but " + std::to_string(block.features.rows()) + " feature rows");
  }
  if (block.features.cols() != dim) {
    throw DataError(name + " feature dimension " + std::to_string(block.features.cols()) +
                    ", expected " + std::to_string(dim));
  }
  for (std::size_t i = 1; i < block.timestamps_ms.size(); ++i) {
    if (block.timestamps_ms[i] <= block.timestamps_ms[i - 1]) {
      throw DataError(name + " timestamps not strictly increasing at segment " +
                      std::to_string(i));
    }
  }
}

// Copies the first `keep` segments and appends padding up to `total`.
void fill_nodes(const ModalityBlock& block, Modality m, std::size_t keep, std::size_t total,
                std::vector<SegmentNode>& nodes, Tensor& features) {
  const std::size_t dim = block.features.cols();
  nodes.clear();
  features = Tensor(total, dim);
  for (std::size_t i = 0; i < total; ++i) {
    SegmentNode n;
    n.ref = {m, i};
    if (i < keep) {
      n.timestamp_ms = block.timestamps_ms[i];
      auto src = block.features.row(i);
      std::copy(src.begin(), src.end(), features.row(i).begin());
    } else {
      n.padding = true;
    }
    nodes.push_back(n);
  }
}

Adjacency build_intra(const std::vector<SegmentNode>& nodes, std::span<const std::uint32_t> ts,
                      Modality m, EdgeKind kind, std::size_t count) {
  Adjacency adj{kind, {}};
  for (const auto& node : nodes) {
    NeighborhoodView view{node.ref, {}};
    if (!node.padding) {
      const std::uint32_t t = node.timestamp_ms;
      for (std::size_t j : nearest_by_time(ts, t, count, node.ref.index)) {
        view.neighbors.push_back({{m, j}, std::max(t, ts[j])});
      }
    }
    adj.rows.push_back(std::move(view));
  }
  return adj;
}

}  // namespace

EventGraph build_event_graph(const ModalityBlock& audio, const ModalityBlock& video,
                             std::vector<std::uint8_t> label, const GraphConfig& config,
                             std::string event_id) {
  if (config.m_audio == 0 || config.m_video == 0 || config.m_cross == 0) {
    throw ConfigError("neighbor counts must be >= 1");
  }
  check_block(audio, Modality::audio, config.audio_dim);
  check_block(video, Modality::video, config.video_dim);

  EventGraph g;
  g.event_id = std::move(event_id);
  g.label = std::move(label);

  const std::size_t total_a = config.n_audio.value_or(audio.timestamps_ms.size());
  const std::size_t total_v = config.n_video.value_or(video.timestamps_ms.size());
  if (total_a == 0 || total_v == 0) throw ConfigError("configured node counts must be >= 1");
  const std::size_t keep_a = std::min(total_a, audio.timestamps_ms.size());
  const std::size_t keep_v = std::min(total_v, video.timestamps_ms.size());
  fill_nodes(audio, Modality::audio, keep_a, total_a, g.audio_nodes, g.audio_features);
  fill_nodes(video, Modality::video, keep_v, total_v, g.video_nodes, g.video_features);

  const std::span<const std::uint32_t> ts_a(audio.timestamps_ms.data(), keep_a);
  const std::span<const std::uint32_t> ts_v(video.timestamps_ms.data(), keep_v);

  auto& meta = g.meta;
  meta.requested_m_audio = config.m_audio;
  meta.requested_m_video = config.m_video;
  meta.requested_m_cross = config.m_cross;
  meta.effective_m_audio = std::min(config.m_audio, keep_a - 1);
  meta.effective_m_video = std::min(config.m_video, keep_v - 1);
  meta.effective_m_cross = std::min(config.m_cross, keep_v);
  meta.truncated_audio = meta.effective_m_audio < config.m_audio;
  meta.truncated_video = meta.effective_m_video < config.m_video;
  meta.truncated_cross = meta.effective_m_cross < config.m_cross;
  meta.real_audio = keep_a;
  meta.real_video = keep_v;
  meta.dropped_audio = audio.timestamps_ms.size() - keep_a;
  meta.dropped_video = video.timestamps_ms.size() - keep_v;

  g.audio_adj = build_intra(g.audio_nodes, ts_a, Modality::audio, EdgeKind::audio_audio,
                            config.m_audio);
  g.video_adj = build_intra(g.video_nodes, ts_v, Modality::video, EdgeKind::video_video,
                            config.m_video);

  g.cross_adj = Adjacency{EdgeKind::audio_from_video, {}};
  for (const auto& node : g.audio_nodes) {
    NeighborhoodView view{node.ref, {}};
    if (!node.padding) {
      const std::uint32_t t = node.timestamp_ms;
      for (std::size_t j : nearest_by_time(ts_v, t, config.m_cross, std::nullopt)) {
        view.neighbors.push_back({{Modality::video, j}, std::max(t, ts_v[j])});
      }
    }
    g.cross_adj.rows.push_back(std::move(view));
  }
  return g;
}

namespace {

void check_adjacency(const EventGraph& g, const Adjacency& adj, Modality src_mod,
                     Modality dst_mod, std::size_t max_degree, ValidationReport& report) {
  const auto name = std::string(to_string(adj.kind));
  auto fail = [&](std::string msg) { report.violations.push_back({name + ": " + std::move(msg)}); };
  const auto& sources = g.nodes(src_mod);
  const auto& targets = g.nodes(dst_mod);
  if (adj.rows.size() != sources.size()) {
    fail("has " + std::to_string(adj.rows.size()) + " rows for " +
         std::to_string(sources.size()) + " source nodes");
  }
  for (const auto& row : adj.rows) {
    const auto& src = row.source;
    if (src.modality != src_mod || src.index >= sources.size()) {
      fail("invalid source node " + to_string(src));
      continue;
    }
    const auto& snode = sources[src.index];
    if (snode.padding && !row.neighbors.empty()) fail("padding node " + to_string(src) + " has neighbors");
    if (row.neighbors.size() > max_degree) {
      fail("node " + to_string(src) + " has " + std::to_string(row.neighbors.size()) +
           " neighbors, limit " + std::to_string(max_degree));
    }
    std::set<std::size_t> seen;
    for (const auto& nb : row.neighbors) {
      const std::string edge = to_string(src) + "->" + to_string(nb.node);
      if (nb.node.modality != dst_mod) {
        fail("edge " + edge + " connects the wrong modality");
        continue;
      }
      if (nb.node.index >= targets.size()) {
        fail("edge " + edge + " targets a missing node");
        continue;
      }
      if (nb.node == src) fail("self-loop on " + to_string(src));
      if (!seen.insert(nb.node.index).second) fail("duplicate neighbor in edge " + edge);
      const auto& tnode = targets[nb.node.index];
      if (tnode.padding) fail("edge " + edge + " targets a padding node");
      const std::uint32_t expected = std::max(snode.timestamp_ms, tnode.timestamp_ms);
      if (nb.edge_timestamp_ms != expected) {
        fail("edge " + edge + " timestamp " + std::to_string(nb.edge_timestamp_ms) +
             ", expected " + std::to_string(expected));
      }
    }
  }
}

void check_nodes(const std::vector<SegmentNode>& nodes, const Tensor& features, Modality m,
                 ValidationReport& report) {
  const auto name = std::string(to_string(m));
  if (features.rows() != nodes.size()) {
    report.violations.push_back({name + ": feature rows " + std::to_string(features.rows()) +
                                 " != node count " + std::to_string(nodes.size())});
  }
  bool have_prev = false;
  std::uint32_t prev = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.ref.modality != m || n.ref.index != i) {
      report.violations.push_back({name + ": node " + std::to_string(i) + " has ref " +
                                   to_string(n.ref)});
    }
    if (n.padding) continue;
    if (have_prev && n.timestamp_ms <= prev) {
      report.violations.push_back({name + ": timestamp of node " + std::to_string(i) +
                                   " not strictly increasing"});
    }
    have_prev = true;
    prev = n.timestamp_ms;
  }
  if (!features.all_finite()) report.violations.push_back({name + ": non-finite features"});
}

}  // namespace

ValidationReport validate_graph(const EventGraph& g) {
  ValidationReport report;
  check_nodes(g.audio_nodes, g.audio_features, Modality::audio, report);
  check_nodes(g.video_nodes, g.video_features, Modality::video, report);
  check_adjacency(g, g.audio_adj, Modality::audio, Modality::audio, g.meta.requested_m_audio,
                  report);
  check_adjacency(g, g.video_adj, Modality::video, Modality::video, g.meta.requested_m_video,
                  report);
  check_adjacency(g, g.cross_adj, Modality::audio, Modality::video, g.meta.requested_m_cross,
                  report);
  if (g.audio_adj.kind != EdgeKind::audio_audio || g.video_adj.kind != EdgeKind::video_video ||
      g.cross_adj.kind != EdgeKind::audio_from_video) {
    report.violations.push_back({"adjacency structures carry the wrong edge kinds"});
  }
  return report;
}

}  // namespace tmac
