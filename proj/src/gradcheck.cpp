#include "tmac/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tmac/error.hpp"
#include "tmac/trainer.hpp"

namespace tmac {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

namespace {

ModalityBlock random_block(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::uniform_int_distribution<std::uint32_t> start(0, 2000);
  std::uniform_int_distribution<std::uint32_t> gap(1, 700);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModalityBlock b;
  std::uint32_t t = start(rng);
  for (std::size_t i = 0; i < n; ++i) {
    b.timestamps_ms.push_back(t);
    t += gap(rng);
  }
  b.features = Tensor(n, dim);
  for (double& x : b.features.data()) x = normal(rng);
  return b;
}

double mean_loss(const ModelParams& params, const std::vector<PreparedGraph>& graphs, double gamma) {
  double total = 0.0;
  for (const auto& g : graphs) {
    Tape tape;
    const ModelVars vars = bind(tape, params, false);
    total += forward_loss(vars, g, tape, gamma).value().item();
  }
  return total / static_cast<double>(graphs.size());
}

}  // namespace

std::vector<PreparedGraph> random_small_graphs(const GradcheckConfig& config, std::mt19937_64& rng) {
  if (config.max_nodes < 2) throw ConfigError("gradcheck needs max_nodes >= 2");
  std::uniform_int_distribution<std::size_t> nodes(2, config.max_nodes);
  std::uniform_int_distribution<std::size_t> m(1, 4);
  std::bernoulli_distribution coin(0.4);
  std::vector<PreparedGraph> out;
  for (std::size_t i = 0; i < config.graphs; ++i) {
    const ModalityBlock audio = random_block(rng, nodes(rng), config.audio_dim);
    const ModalityBlock video = random_block(rng, nodes(rng), config.video_dim);
    std::vector<std::uint8_t> label(config.n_classes, 0);
    label[i % config.n_classes] = 1;
    for (auto& l : label) l = l || coin(rng);

    GraphConfig gc;
    gc.m_audio = m(rng);
    gc.m_video = m(rng);
    gc.m_cross = m(rng);
    gc.audio_dim = config.audio_dim;
    gc.video_dim = config.video_dim;
    gc.n_audio = config.max_nodes;
    gc.n_video = config.max_nodes;
    const EventGraph g = build_event_graph(audio, video, label, gc, "gradcheck_" + std::to_string(i));
    out.push_back(prepare_graph(g, kAllVariants[i % std::size(kAllVariants)]));
  }
  return out;
}

ModelParams random_params(const ModelShape& shape, std::mt19937_64& rng) {
  ModelParams p = make_model(shape);
  std::uniform_real_distribution<double> dist(-0.6, 0.6);
  for (auto& np : named_parameters(p))
    for (double& x : np.tensor->data()) x = dist(rng);
  return p;
}

GradcheckReport check_gradients(ModelParams params, const std::vector<PreparedGraph>& graphs,
                                double gamma, double step) {
  if (graphs.empty()) throw ConfigError("gradcheck needs at least one graph");
  std::vector<const PreparedGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  const GradientResult analytic = compute_gradients(params, batch, gamma, 1);

  GradcheckReport report;
  report.graphs = graphs.size();
  auto named = named_parameters(params);
  for (std::size_t p = 0; p < named.size(); ++p) {
    const auto values = named[p].tensor->data();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double up = mean_loss(params, graphs, gamma);
      values[k] = saved - step;
      const double down = mean_loss(params, graphs, gamma);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.grads[p].data()[k];
      const double err = relative_error(a, numeric);
      ++report.entries_checked;
      if (err > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = std::max(err, report.max_rel_error);
        report.worst_parameter = named[p].name;
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  std::mt19937_64 rng(config.seed);
  const auto graphs = random_small_graphs(config, rng);
  ModelShape shape;
  shape.audio_dim = config.audio_dim;
  shape.video_dim = config.video_dim;
  shape.hidden = config.hidden;
  shape.layers = config.layers;
  shape.n_audio = config.max_nodes;
  shape.n_video = config.max_nodes;
  shape.n_classes = config.n_classes;
  return check_gradients(random_params(shape, rng), graphs, config.gamma, config.step);
}

}  // namespace tmac
