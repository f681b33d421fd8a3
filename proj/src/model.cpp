#include "tmac/model.hpp"

#include <utility>

#include "tmac/error.hpp"

namespace tmac {

ModelParams make_model(const ModelShape& shape) {
  ModelParams p;
  p.shape = shape;
  p.stack = make_layer_stack(shape.audio_dim, shape.video_dim, shape.hidden, shape.layers);
  p.readout = make_readout(shape.n_audio, shape.n_video, shape.hidden, shape.n_classes);
  for (const auto& np : named_parameters(std::as_const(p))) {
    p.adam.first_moment.emplace_back(np.tensor->rows(), np.tensor->cols());
    p.adam.second_moment.emplace_back(np.tensor->rows(), np.tensor->cols());
  }
  return p;
}

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  for (std::size_t l = 0; l < p.stack.layers(); ++l) {
    const std::string idx = std::to_string(l);
    out.push_back({"gcn_a." + idx + ".weight", &p.stack.audio_gcn[l].weight});
    out.push_back({"gcn_v." + idx + ".weight", &p.stack.video_gcn[l].weight});
    auto& gat = p.stack.cross_gat[l];
    out.push_back({"gat." + idx + ".weight", &gat.weight});
    if (!gat.dst_weight.empty()) out.push_back({"gat." + idx + ".dst_weight", &gat.dst_weight});
    out.push_back({"gat." + idx + ".attention", &gat.attention});
  }
  out.push_back({"readout.pool_audio", &p.readout.pool_audio});
  out.push_back({"readout.pool_video", &p.readout.pool_video});
  out.push_back({"readout.classifier", &p.readout.classifier});
  out.push_back({"readout.bias", &p.readout.bias});
}

}  // namespace

std::vector<NamedTensor> named_parameters(ModelParams& params) {
  std::vector<NamedTensor> out;
  collect(params, out);
  return out;
}

std::vector<NamedConstTensor> named_parameters(const ModelParams& params) {
  std::vector<NamedConstTensor> out;
  collect(params, out);
  return out;
}

std::size_t count_params(const ModelParams& params) {
  std::size_t total = 0;
  for (const auto& np : named_parameters(params)) total += np.tensor->size();
  return total;
}

PreparedGraph prepare_graph(const EventGraph& g, Variant variant) {
  const WeightedGraph w = weight_graph(g, variant);
  PreparedGraph p;
  p.event_id = g.event_id;
  p.audio_features = g.audio_features;
  p.video_features = g.video_features;
  p.audio_adj = normalized_adjacency(w.audio, g.audio_nodes.size());
  p.video_adj = normalized_adjacency(w.video, g.video_nodes.size());
  p.cross = cross_attention(w.cross, g.audio_nodes.size(), g.video_nodes.size());
  p.label = g.label;
  return p;
}

ModelVars bind(Tape& tape, const ModelParams& params, bool with_grad) {
  ModelVars v;
  auto leaf = [&](const Tensor& t) {
    Var x = with_grad ? tape.parameter(t) : tape.constant_ref(t);
    v.flat.push_back(x);
    return x;
  };
  // Same traversal as collect() so that `flat` lines up with named_parameters.
  for (std::size_t l = 0; l < params.stack.layers(); ++l) {
    v.stack.audio_gcn.push_back({leaf(params.stack.audio_gcn[l].weight)});
    v.stack.video_gcn.push_back({leaf(params.stack.video_gcn[l].weight)});
    const auto& gat = params.stack.cross_gat[l];
    GatLayerVars gv;
    gv.weight = leaf(gat.weight);
    if (!gat.dst_weight.empty()) gv.dst_weight = leaf(gat.dst_weight);
    gv.attention = leaf(gat.attention);
    gv.leaky_slope = gat.leaky_slope;
    v.stack.cross_gat.push_back(gv);
  }
  v.readout.pool_audio = leaf(params.readout.pool_audio);
  v.readout.pool_video = leaf(params.readout.pool_video);
  v.readout.classifier = leaf(params.readout.classifier);
  v.readout.bias = leaf(params.readout.bias);
  return v;
}

Var forward_logits(const ModelVars& vars, const PreparedGraph& g, Tape& tape) {
  Var x_a = tape.constant_ref(g.audio_features);
  Var x_v = tape.constant_ref(g.video_features);
  const StackOutput z = stack_forward(vars.stack, g.audio_adj, g.video_adj, g.cross, x_a, x_v);
  Var emb = readout(z.audio, z.video, vars.readout.pool_audio, vars.readout.pool_video);
  return classify(emb, vars.readout.classifier, vars.readout.bias);
}

Var forward_loss(const ModelVars& vars, const PreparedGraph& g, Tape& tape, double gamma) {
  return focal_loss(probabilities(forward_logits(vars, g, tape)), g.label, gamma);
}

Prediction predict(const ModelParams& params, const PreparedGraph& g) {
  Tape tape;
  const ModelVars vars = bind(tape, params, false);
  const Var logits = forward_logits(vars, g, tape);
  return Prediction::from_logits(logits.value().data());
}

}  // namespace tmac
