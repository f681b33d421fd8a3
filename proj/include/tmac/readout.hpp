#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tmac/tape.hpp"

namespace tmac {

/// Probabilities are clamped to [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

struct ReadoutParams {
  Tensor pool_audio;  ///< (n_audio x 1) learnable pooling vector
  Tensor pool_video;  ///< (n_video x 1)
  Tensor classifier;  ///< (2 hidden x n_classes)
  Tensor bias;        ///< (1 x n_classes)
};

ReadoutParams make_readout(std::size_t n_audio, std::size_t n_video, std::size_t hidden,
                           std::size_t n_classes);

struct ReadoutVars {
  Var pool_audio;
  Var pool_video;
  Var classifier;
  Var bias;
};

ReadoutVars bind(Tape& tape, const ReadoutParams& params);

/// Graph embedding [P_a^T Z_a | P_v^T Z_v], shape (1 x 2 hidden).
Var readout(Var z_audio, Var z_video, Var pool_audio, Var pool_video);
Tensor readout(const Tensor& z_audio, const Tensor& z_video, const Tensor& pool_audio,
               const Tensor& pool_video);

/// Linear head: (1 x 2 hidden) -> (1 x n_classes) logits.
Var classify(Var embedding, Var classifier, Var bias);

/// Per-class sigmoid, clamped.
Var probabilities(Var logits);

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;

  static Prediction from_logits(std::span<const double> logits);
};

/// Multi-label focal loss summed over classes:
///   -(1 - p_t)^gamma * ln(p_t),  p_t = p if label = 1 else 1 - p.
/// Throws ConfigError for gamma < 0, DimensionError on length mismatch.
Var focal_loss(Var probs, std::span<const std::uint8_t> label, double gamma);
double focal_loss(std::span<const double> probs, std::span<const std::uint8_t> label,
                  double gamma);
double focal_loss(const Prediction& pred, std::span<const std::uint8_t> label, double gamma);

}  // namespace tmac
