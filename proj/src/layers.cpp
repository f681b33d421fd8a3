#include "tmac/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

Tensor normalized_adjacency(const WeightedAdjacency& adj, std::size_t n_nodes) {
  if (adj.rows.size() != n_nodes) {
    throw DimensionError("adjacency has " + std::to_string(adj.rows.size()) + " rows for " +
                         std::to_string(n_nodes) + " nodes");
  }
  Tensor a(n_nodes, n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto& row = adj.rows[i];
    double self = row.neighbors.empty() ? 1.0 : 0.0;
    for (const auto& nb : row.neighbors) {
      if (nb.node.index >= n_nodes) throw DimensionError("adjacency neighbor out of range");
      a(i, nb.node.index) += nb.weight;
      self = std::max(self, nb.weight);
    }
    a(i, i) += self;
    double total = 0.0;
    for (double v : a.row(i)) total += v;
    for (double& v : a.row(i)) v /= total;
  }
  return a;
}

CrossAttention cross_attention(const WeightedAdjacency& adj, std::size_t n_dst,
                               std::size_t n_src) {
  if (adj.rows.size() != n_dst) {
    throw DimensionError("cross adjacency has " + std::to_string(adj.rows.size()) +
                         " rows for " + std::to_string(n_dst) + " destination nodes");
  }
  CrossAttention c{Tensor(n_dst, n_src), Tensor(n_dst, n_src)};
  for (std::size_t i = 0; i < n_dst; ++i) {
    for (const auto& nb : adj.rows[i].neighbors) {
      if (nb.node.index >= n_src) throw DimensionError("cross neighbor out of range");
      c.log_weight(i, nb.node.index) = std::log(nb.weight);
      c.mask(i, nb.node.index) = 1.0;
    }
  }
  return c;
}

LayerStack make_layer_stack(std::size_t audio_dim, std::size_t video_dim, std::size_t hidden,
                            std::size_t layers) {
  LayerStack s;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in_a = l == 0 ? audio_dim : hidden;
    const std::size_t in_v = l == 0 ? video_dim : hidden;
    s.audio_gcn.push_back({Tensor(in_a, hidden)});
    s.video_gcn.push_back({Tensor(in_v, hidden)});
    GatLayerParams gat;
    gat.weight = Tensor(in_v, hidden);
    if (in_a != in_v) gat.dst_weight = Tensor(in_a, hidden);
    gat.attention = Tensor(2 * hidden, 1);
    s.cross_gat.push_back(std::move(gat));
  }
  return s;
}

LayerStackVars bind(Tape& tape, const LayerStack& stack) {
  LayerStackVars v;
  for (const auto& p : stack.audio_gcn) v.audio_gcn.push_back({tape.parameter(p.weight)});
  for (const auto& p : stack.video_gcn) v.video_gcn.push_back({tape.parameter(p.weight)});
  for (const auto& p : stack.cross_gat) {
    GatLayerVars g;
    g.weight = tape.parameter(p.weight);
    if (!p.dst_weight.empty()) g.dst_weight = tape.parameter(p.dst_weight);
    g.attention = tape.parameter(p.attention);
    g.leaky_slope = p.leaky_slope;
    v.cross_gat.push_back(g);
  }
  return v;
}

Var gcn_forward(const GcnLayerVars& p, const Tensor& normalized_adj, Var z) {
  if (normalized_adj.rows() != z.rows() || normalized_adj.cols() != z.rows()) {
    throw DimensionError("gcn_forward: adjacency " + normalized_adj.shape_string() +
                         " vs embeddings " + z.value().shape_string());
  }
  Tape& t = *z.tape();
  // Project first: (n x d_in)(d_in x d_out) is far cheaper than Â Z on wide inputs.
  return relu(matmul(t.constant_ref(normalized_adj), matmul(z, p.weight)));
}

Var gat_forward(const GatLayerVars& p, const CrossAttention& cross, Var z_src, Var z_dst) {
  const std::size_t n_dst = z_dst.rows(), n_src = z_src.rows();
  if (cross.mask.rows() != n_dst || cross.mask.cols() != n_src) {
    throw DimensionError("gat_forward: attention mask " + cross.mask.shape_string() +
                         " vs destination/source node counts " + std::to_string(n_dst) + "/" +
                         std::to_string(n_src));
  }
  Tape& t = *z_src.tape();
  const std::size_t width = p.weight.cols();
  if (p.attention.rows() != 2 * width || p.attention.cols() != 1) {
    throw DimensionError("gat_forward: attention vector " + p.attention.value().shape_string() +
                         " for output width " + std::to_string(width));
  }
  Var h_src = matmul(z_src, p.weight);
  Var h_dst = matmul(z_dst, p.dst_weight ? *p.dst_weight : p.weight);
  Var a_dst = slice_rows(p.attention, 0, width);
  Var a_src = slice_rows(p.attention, width, width);
  Var score_dst = matmul(h_dst, a_dst);               // (n_dst x 1)
  Var score_src = transpose(matmul(h_src, a_src));    // (1 x n_src)
  Var logits = leaky_relu(outer_sum(score_dst, score_src), p.leaky_slope);
  logits = add(logits, t.constant_ref(cross.log_weight));
  Var alpha = masked_softmax_rows(logits, cross.mask);
  return relu(matmul(alpha, h_src));
}

StackOutput stack_forward(const LayerStackVars& stack, const Tensor& audio_adj,
                          const Tensor& video_adj, const CrossAttention& cross, Var x_audio,
                          Var x_video) {
  const std::size_t layers = stack.audio_gcn.size();
  if (stack.video_gcn.size() != layers || stack.cross_gat.size() != layers) {
    throw DimensionError("layer stack has inconsistent layer counts");
  }
  if (layers == 0) return {x_audio, x_video};
  if (x_audio.cols() != stack.audio_gcn[0].weight.rows() ||
      x_video.cols() != stack.video_gcn[0].weight.rows()) {
    throw DimensionError("stack input widths " + std::to_string(x_audio.cols()) + "/" +
                         std::to_string(x_video.cols()) + " do not match first layer " +
                         std::to_string(stack.audio_gcn[0].weight.rows()) + "/" +
                         std::to_string(stack.video_gcn[0].weight.rows()));
  }
  Var z_a = x_audio;
  Var z_v = x_video;
  for (std::size_t l = 0; l < layers; ++l) {
    Var next_v = gcn_forward(stack.video_gcn[l], video_adj, z_v);
    Var next_a = add(gcn_forward(stack.audio_gcn[l], audio_adj, z_a),
                     gat_forward(stack.cross_gat[l], cross, z_v, z_a));
    z_a = next_a;
    z_v = next_v;
  }
  return {z_a, z_v};
}

Tensor gcn_forward(const GcnLayerParams& p, const WeightedAdjacency& adj, const Tensor& z) {
  Tape tape;
  const Tensor a = normalized_adjacency(adj, z.rows());
  return gcn_forward(GcnLayerVars{tape.constant_ref(p.weight)}, a, tape.constant_ref(z)).value();
}

Tensor gat_forward(const GatLayerParams& p, const WeightedAdjacency& cross, const Tensor& z_src,
                   const Tensor& z_dst) {
  Tape tape;
  const CrossAttention c = cross_attention(cross, z_dst.rows(), z_src.rows());
  GatLayerVars v;
  v.weight = tape.constant_ref(p.weight);
  if (!p.dst_weight.empty()) v.dst_weight = tape.constant_ref(p.dst_weight);
  v.attention = tape.constant_ref(p.attention);
  v.leaky_slope = p.leaky_slope;
  return gat_forward(v, c, tape.constant_ref(z_src), tape.constant_ref(z_dst)).value();
}

}  // namespace tmac
