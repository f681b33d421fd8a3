#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "tmac/tape.hpp"
#include "tmac/temporal_weight.hpp"

namespace tmac {

/// Dense row-stochastic propagation matrix for a GCN layer.
///
/// Row i holds the temporal weights of N_i plus a self-loop, divided by the
/// row sum. The self-loop carries the largest weight present in the row (1
/// for an isolated node or an unweighted row), so a uniformly rescaled row
/// normalizes to the same distribution.
Tensor normalized_adjacency(const WeightedAdjacency& adj, std::size_t n_nodes);

/// Additive attention bias for the cross-modal GAT: ln(w_ij) where an edge
/// exists, with a 0/1 mask marking the edges. Both are (n_dst x n_src).
struct CrossAttention {
  Tensor log_weight;
  Tensor mask;
};

CrossAttention cross_attention(const WeightedAdjacency& adj, std::size_t n_dst,
                               std::size_t n_src);

struct GcnLayerParams {
  Tensor weight;  ///< (d_in x d_out)
};

struct GatLayerParams {
  Tensor weight;      ///< source projection (d_src x d_out)
  Tensor dst_weight;  ///< destination projection (d_dst x d_out); empty when d_dst == d_src
  Tensor attention;   ///< (2 d_out x 1): destination half, then source half
  double leaky_slope = 0.2;
};

/// L layers of GCN_a, GCN_v and cross-modal GAT. Layer 0 lifts the raw
/// feature widths to the hidden width; later layers are hidden -> hidden.
struct LayerStack {
  std::vector<GcnLayerParams> audio_gcn;
  std::vector<GcnLayerParams> video_gcn;
  std::vector<GatLayerParams> cross_gat;

  std::size_t layers() const noexcept { return audio_gcn.size(); }
};

/// Zero-initialized stack with the right shapes.
LayerStack make_layer_stack(std::size_t audio_dim, std::size_t video_dim, std::size_t hidden,
                            std::size_t layers);

struct GcnLayerVars {
  Var weight;
};

struct GatLayerVars {
  Var weight;
  std::optional<Var> dst_weight;
  Var attention;
  double leaky_slope = 0.2;
};

struct LayerStackVars {
  std::vector<GcnLayerVars> audio_gcn;
  std::vector<GcnLayerVars> video_gcn;
  std::vector<GatLayerVars> cross_gat;
};

/// Registers every tensor of `stack` as a parameter leaf on `tape`.
LayerStackVars bind(Tape& tape, const LayerStack& stack);

/// relu(Â Z W), with Â a constant normalized adjacency.
Var gcn_forward(const GcnLayerVars& p, const Tensor& normalized_adj, Var z);

/// Cross-modal attention: each destination node attends over its source
/// neighbors with logits leaky_relu(a^T [W_d h_i || W h_j]) + ln w_ij, and
/// returns relu(sum_j alpha_ij W h_j). Destinations without neighbors get 0.
Var gat_forward(const GatLayerVars& p, const CrossAttention& cross, Var z_src, Var z_dst);

struct StackOutput {
  Var audio;
  Var video;
};

/// Runs all layers. Per layer the video update reads the previous video
/// embeddings; the audio update adds its GCN term to the GAT term computed
/// from the previous layer's video embeddings.
StackOutput stack_forward(const LayerStackVars& stack, const Tensor& audio_adj,
                          const Tensor& video_adj, const CrossAttention& cross, Var x_audio,
                          Var x_video);

// Gradient-free conveniences.
Tensor gcn_forward(const GcnLayerParams& p, const WeightedAdjacency& adj, const Tensor& z);
Tensor gat_forward(const GatLayerParams& p, const WeightedAdjacency& cross, const Tensor& z_src,
                   const Tensor& z_dst);

}  // namespace tmac
