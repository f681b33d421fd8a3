#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tmac/model.hpp"

namespace tmac {

struct GradcheckConfig {
  std::size_t graphs = 20;
  std::size_t max_nodes = 10;  ///< per modality, padding included
  std::size_t audio_dim = 16;
  std::size_t video_dim = 24;
  std::size_t hidden = 8;
  std::size_t layers = 2;
  std::size_t n_classes = 3;
  double gamma = 2.0;
  double step = 1e-5;
  std::uint64_t seed = 0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t entries_checked = 0;
  std::size_t graphs = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |a - n| / max(|a|, |n|, 1e-6).
double relative_error(double analytic, double numeric);

/// Random events with 2..max_nodes real segments per modality, padded to
/// max_nodes, random neighbor counts and cycling through every variant.
std::vector<PreparedGraph> random_small_graphs(const GradcheckConfig& config, std::mt19937_64& rng);

/// Parameters with every entry drawn at random (pooling and bias included).
ModelParams random_params(const ModelShape& shape, std::mt19937_64& rng);

/// Compares the batch-mean loss gradient against central differences for
/// every parameter entry.
GradcheckReport check_gradients(ModelParams params, const std::vector<PreparedGraph>& graphs,
                                double gamma, double step);

GradcheckReport run_gradcheck(const GradcheckConfig& config);

}  // namespace tmac
