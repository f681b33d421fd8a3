#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tmac/graph.hpp"
#include "tmac/layers.hpp"
#include "tmac/readout.hpp"
#include "tmac/temporal_weight.hpp"

namespace tmac {

/// Every width and count that fixes parameter shapes.
struct ModelShape {
  std::size_t audio_dim = 128;
  std::size_t video_dim = 1024;
  std::size_t hidden = 512;
  std::size_t layers = 4;
  std::size_t n_audio = 40;
  std::size_t n_video = 100;
  std::size_t n_classes = 33;

  bool operator==(const ModelShape&) const = default;
};

/// First/second moment estimates mirroring the parameter list, plus step count.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

struct ModelParams {
  ModelShape shape;
  LayerStack stack;
  ReadoutParams readout;
  AdamState adam;
};

/// Zero-valued parameters (and zeroed optimizer state) of the given shape.
ModelParams make_model(const ModelShape& shape);

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};
struct NamedConstTensor {
  std::string name;
  const Tensor* tensor;
};

/// All learnable tensors in a fixed order. Optimizer state and checkpoints
/// index parameters by this order.
std::vector<NamedTensor> named_parameters(ModelParams& params);
std::vector<NamedConstTensor> named_parameters(const ModelParams& params);

/// Exact number of learnable scalars.
std::size_t count_params(const ModelParams& params);

/// Everything the forward pass needs from one event, for one variant.
struct PreparedGraph {
  std::string event_id;
  Tensor audio_features;
  Tensor video_features;
  Tensor audio_adj;  ///< normalized, with self-loops
  Tensor video_adj;
  CrossAttention cross;
  std::vector<std::uint8_t> label;
};

PreparedGraph prepare_graph(const EventGraph& g, Variant variant);

struct ModelVars {
  LayerStackVars stack;
  ReadoutVars readout;
  std::vector<Var> flat;  ///< same order as named_parameters
};

/// Binds parameters as gradient leaves, or as constants when `with_grad` is false.
ModelVars bind(Tape& tape, const ModelParams& params, bool with_grad = true);

/// (1 x n_classes) logits for one event.
Var forward_logits(const ModelVars& vars, const PreparedGraph& g, Tape& tape);

/// Focal loss of one event; the tape holds the full computation.
Var forward_loss(const ModelVars& vars, const PreparedGraph& g, Tape& tape, double gamma);

Prediction predict(const ModelParams& params, const PreparedGraph& g);

}  // namespace tmac
