#include "tmac/readout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tmac/error.hpp"

namespace tmac {

ReadoutParams make_readout(std::size_t n_audio, std::size_t n_video, std::size_t hidden,
                           std::size_t n_classes) {
  return {Tensor(n_audio, 1), Tensor(n_video, 1), Tensor(2 * hidden, n_classes),
          Tensor(1, n_classes)};
}

ReadoutVars bind(Tape& tape, const ReadoutParams& params) {
  return {tape.parameter(params.pool_audio), tape.parameter(params.pool_video),
          tape.parameter(params.classifier), tape.parameter(params.bias)};
}

Var readout(Var z_audio, Var z_video, Var pool_audio, Var pool_video) {
  if (pool_audio.rows() != z_audio.rows() || pool_video.rows() != z_video.rows()) {
    throw DimensionError("readout: pooling vectors of length " +
                         std::to_string(pool_audio.rows()) + "/" +
                         std::to_string(pool_video.rows()) + " for node counts " +
                         std::to_string(z_audio.rows()) + "/" + std::to_string(z_video.rows()));
  }
  Var pooled_a = matmul(transpose(pool_audio), z_audio);
  Var pooled_v = matmul(transpose(pool_video), z_video);
  return concat_cols(pooled_a, pooled_v);
}

Tensor readout(const Tensor& z_audio, const Tensor& z_video, const Tensor& pool_audio,
               const Tensor& pool_video) {
  Tape t;
  return readout(t.constant_ref(z_audio), t.constant_ref(z_video), t.constant_ref(pool_audio),
                 t.constant_ref(pool_video))
      .value();
}

Var classify(Var embedding, Var classifier, Var bias) {
  return add(matmul(embedding, classifier), bias);
}

Var probabilities(Var logits) { return clamp(sigmoid(logits), kProbEps, 1.0 - kProbEps); }

Prediction Prediction::from_logits(std::span<const double> logits) {
  Prediction p;
  p.logits.assign(logits.begin(), logits.end());
  for (double z : logits) {
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    p.probabilities.push_back(std::clamp(s, kProbEps, 1.0 - kProbEps));
  }
  return p;
}

namespace {

void check_focal_args(std::size_t n_probs, std::span<const std::uint8_t> label, double gamma) {
  if (gamma < 0) throw ConfigError("focal loss gamma must be >= 0, got " + std::to_string(gamma));
  if (n_probs != label.size()) {
    throw DimensionError("focal loss: " + std::to_string(n_probs) + " probabilities for " +
                         std::to_string(label.size()) + " labels");
  }
}

}  // namespace

Var focal_loss(Var probs, std::span<const std::uint8_t> label, double gamma) {
  check_focal_args(probs.value().size(), label, gamma);
  Tape& t = *probs.tape();
  // p_t = (1 - y) + (2y - 1) p, elementwise.
  Tensor offset(probs.rows(), probs.cols());
  Tensor sign(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < label.size(); ++i) {
    offset[i] = label[i] ? 0.0 : 1.0;
    sign[i] = label[i] ? 1.0 : -1.0;
  }
  Var p_t = add(mul(probs, t.constant(std::move(sign))), t.constant(std::move(offset)));
  Var modulator = pow(add_scalar(scale(p_t, -1.0), 1.0), gamma);
  return scale(sum(mul(modulator, log(p_t))), -1.0);
}

double focal_loss(std::span<const double> probs, std::span<const std::uint8_t> label,
                  double gamma) {
  check_focal_args(probs.size(), label, gamma);
  double total = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = std::clamp(probs[c], kProbEps, 1.0 - kProbEps);
    const double p_t = label[c] ? p : 1.0 - p;
    const double mod = gamma == 0.0 ? 1.0 : std::pow(1.0 - p_t, gamma);
    total += -mod * std::log(p_t);
  }
  return total;
}

double focal_loss(const Prediction& pred, std::span<const std::uint8_t> label, double gamma) {
  return focal_loss(pred.probabilities, label, gamma);
}

}  // namespace tmac
