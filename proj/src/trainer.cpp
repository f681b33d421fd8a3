#include "tmac/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "tmac/error.hpp"
#include "tmac/parallel.hpp"

namespace tmac {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad value for " + key + ": '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("bad value for " + key + ": '" + s + "'");
  }
  return v;
}

// Fixed key order for describe() and checkpoints.
const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "M_a",         "M_v",          "M_c",        "layers",   "hidden",        "gamma",
      "base_lr",     "decay_factor", "decay_interval", "warmup_iters", "batch_size", "max_iters",
      "eval_interval", "patience",   "seed",       "variant",  "workers",       "audio_dim",
      "video_dim",   "n_audio",      "n_video"};
  return keys;
}

}  // namespace

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be >= 1");
  };
  positive(M_a, "M_a");
  positive(M_v, "M_v");
  positive(M_c, "M_c");
  positive(layers, "layers");
  positive(hidden, "hidden");
  positive(decay_interval, "decay_interval");
  positive(batch_size, "batch_size");
  positive(eval_interval, "eval_interval");
  positive(patience, "patience");
  positive(workers, "workers");
  positive(audio_dim, "audio_dim");
  positive(video_dim, "video_dim");
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be finite and >= 0");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
}

std::map<std::string, std::string> to_key_values(const TrainConfig& c) {
  return {
      {"M_a", std::to_string(c.M_a)},
      {"M_v", std::to_string(c.M_v)},
      {"M_c", std::to_string(c.M_c)},
      {"layers", std::to_string(c.layers)},
      {"hidden", std::to_string(c.hidden)},
      {"gamma", format_double(c.gamma)},
      {"base_lr", format_double(c.base_lr)},
      {"decay_factor", format_double(c.decay_factor)},
      {"decay_interval", std::to_string(c.decay_interval)},
      {"warmup_iters", std::to_string(c.warmup_iters)},
      {"batch_size", std::to_string(c.batch_size)},
      {"max_iters", std::to_string(c.max_iters)},
      {"eval_interval", std::to_string(c.eval_interval)},
      {"patience", std::to_string(c.patience)},
      {"seed", std::to_string(c.seed)},
      {"variant", std::string(to_string(c.variant))},
      {"workers", std::to_string(c.workers)},
      {"audio_dim", std::to_string(c.audio_dim)},
      {"video_dim", std::to_string(c.video_dim)},
      {"n_audio", std::to_string(c.n_audio)},
      {"n_video", std::to_string(c.n_video)},
  };
}

TrainConfig train_config_from(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) { return static_cast<std::size_t>(parse_u64(get(key), key)); };
  c.M_a = count("M_a");
  c.M_v = count("M_v");
  c.M_c = count("M_c");
  c.layers = count("layers");
  c.hidden = count("hidden");
  c.gamma = parse_double(get("gamma"), "gamma");
  c.base_lr = parse_double(get("base_lr"), "base_lr");
  c.decay_factor = parse_double(get("decay_factor"), "decay_factor");
  c.decay_interval = count("decay_interval");
  c.warmup_iters = count("warmup_iters");
  c.batch_size = count("batch_size");
  c.max_iters = count("max_iters");
  c.eval_interval = count("eval_interval");
  c.patience = count("patience");
  c.seed = parse_u64(get("seed"), "seed");
  c.variant = parse_variant(get("variant"));
  c.workers = count("workers");
  c.audio_dim = count("audio_dim");
  c.video_dim = count("video_dim");
  c.n_audio = count("n_audio");
  c.n_video = count("n_video");
  return c;
}

std::string describe(const TrainConfig& c) {
  const auto kv = to_key_values(c);
  std::string out;
  for (const auto& key : config_keys()) out += key + "=" + kv.at(key) + "\n";
  return out;
}

double lr_at(std::size_t iteration, const TrainConfig& c) {
  if (iteration < c.warmup_iters) {
    return c.base_lr * static_cast<double>(iteration) / static_cast<double>(c.warmup_iters);
  }
  const std::size_t decays = (iteration - c.warmup_iters) / c.decay_interval;
  return c.base_lr * std::pow(c.decay_factor, static_cast<double>(decays));
}

GraphConfig graph_config(const TrainConfig& c, std::size_t n_audio, std::size_t n_video) {
  GraphConfig g;
  g.m_audio = c.M_a;
  g.m_video = c.M_v;
  g.m_cross = c.M_c;
  g.audio_dim = c.audio_dim;
  g.video_dim = c.video_dim;
  g.n_audio = n_audio;
  g.n_video = n_video;
  return g;
}

ModelShape model_shape(const TrainConfig& c, std::size_t n_audio, std::size_t n_video,
                       std::size_t n_classes) {
  ModelShape s;
  s.audio_dim = c.audio_dim;
  s.video_dim = c.video_dim;
  s.hidden = c.hidden;
  s.layers = c.layers;
  s.n_audio = n_audio;
  s.n_video = n_video;
  s.n_classes = n_classes;
  return s;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p = make_model(shape);
  std::mt19937_64 rng(seed);
  for (auto& np : named_parameters(p)) {
    Tensor& t = *np.tensor;
    if (np.name == "readout.pool_audio" || np.name == "readout.pool_video" ||
        np.name == "readout.bias") {
      const double v = 1.0 / static_cast<double>(np.name == "readout.bias" ? t.cols() : t.rows());
      for (double& x : t.data()) x = v;
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : t.data()) x = dist(rng);
  }
  return p;
}

GradientResult compute_gradients(const ModelParams& params,
                                 std::span<const PreparedGraph* const> batch, double gamma,
                                 std::size_t workers) {
  if (batch.empty()) throw ConfigError("compute_gradients: empty batch");
  const auto named = named_parameters(params);
  GradientResult out;
  for (const auto& np : named) out.grads.emplace_back(np.tensor->rows(), np.tensor->cols());

  workers = std::max<std::size_t>(workers, 1);
  std::vector<std::vector<Tensor>> wave_grads(workers);
  std::vector<double> wave_loss(workers);
  // Waves of `workers` graphs; each wave is summed in batch order so the
  // total never depends on the worker count.
  for (std::size_t begin = 0; begin < batch.size(); begin += workers) {
    const std::size_t n = std::min(workers, batch.size() - begin);
    parallel_for(n, workers, [&](std::size_t k) {
      const PreparedGraph& g = *batch[begin + k];
      try {
        Tape tape;
        const ModelVars vars = bind(tape, params, true);
        const Var loss = forward_loss(vars, g, tape, gamma);
        tape.backward(loss);
        wave_loss[k] = loss.value().item();
        auto& grads = wave_grads[k];
        grads.clear();
        for (Var v : vars.flat) grads.push_back(tape.grad(v));
      } catch (const NumericError& e) {
        throw NumericError("event '" + g.event_id + "': " + e.what());
      }
    });
    for (std::size_t k = 0; k < n; ++k) {
      out.loss += wave_loss[k];
      for (std::size_t p = 0; p < out.grads.size(); ++p) add_inplace(out.grads[p], wave_grads[k][p]);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (auto& g : out.grads)
    for (double& x : g.data()) x *= inv;
  if (!std::isfinite(out.loss)) throw NumericError("non-finite batch loss");
  return out;
}

double train_step(ModelParams& params, std::span<const PreparedGraph* const> batch,
                  const TrainConfig& config) {
  const GradientResult g = compute_gradients(params, batch, config.gamma, config.workers);
  const double lr = lr_at(static_cast<std::size_t>(params.adam.step) + 1, config);
  adam_step(params, g.grads, lr);
  return g.loss;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.manifest = read_manifest(manifest_path);
  d.train = load_split(d.manifest, Split::train);
  d.eval = load_split(d.manifest, Split::eval);
  d.test = load_split(d.manifest, Split::test);
  return d;
}

PreparedSplits prepare_splits(const Dataset& data, const TrainConfig& config) {
  config.validate();
  const auto& m = data.manifest;
  auto resolve = [](std::size_t configured, std::size_t dataset, const char* name) {
    if (configured != 0 && dataset != 0 && configured != dataset) {
      throw ConfigError(std::string("config/dataset node-count mismatch for ") + name + ": " +
                        std::to_string(configured) + " vs " + std::to_string(dataset));
    }
    const std::size_t v = configured != 0 ? configured : dataset;
    if (v == 0) throw ConfigError(std::string(name) + " unknown: set it in the config or manifest");
    return v;
  };
  const std::size_t n_a = resolve(config.n_audio, m.n_audio, "n_audio");
  const std::size_t n_v = resolve(config.n_video, m.n_video, "n_video");
  if (data.train.empty()) throw DataError("empty train split");
  if (data.eval.empty()) throw DataError("empty eval split");
  if (data.test.empty()) throw DataError("empty test split");

  PreparedSplits out;
  out.shape = model_shape(config, n_a, n_v, m.n_classes);
  const GraphConfig gc = graph_config(config, n_a, n_v);
  auto prep = [&](const std::vector<EventRecord>& records, std::vector<PreparedGraph>& dst) {
    dst.reserve(records.size());
    for (const auto& r : records) {
      const EventGraph g = build_event_graph(r, gc);
      if (g.meta.truncated_audio || g.meta.truncated_video || g.meta.truncated_cross) {
        ++out.truncated_neighborhoods;
      }
      dst.push_back(prepare_graph(g, config.variant));
    }
  };
  prep(data.train, out.train);
  prep(data.eval, out.eval);
  prep(data.test, out.test);
  return out;
}

MetricReport evaluate(const ModelParams& params, std::span<const PreparedGraph> split,
                      std::size_t workers) {
  const std::size_t n_classes = params.shape.n_classes;
  Tensor scores(split.size(), n_classes);
  std::vector<std::vector<std::uint8_t>> labels(split.size());
  parallel_for(split.size(), workers, [&](std::size_t i) {
    const Prediction p = predict(params, split[i]);
    for (std::size_t c = 0; c < n_classes; ++c) scores(i, c) = p.probabilities[c];
    labels[i] = split[i].label;
  });
  return compute_metrics(scores, labels);
}

namespace {

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

}  // namespace

TrainResult train(const PreparedSplits& splits, const TrainConfig& config) {
  config.validate();
  if (splits.train.empty()) throw DataError("empty train split");
  if (splits.eval.empty()) throw DataError("empty eval split");

  TrainResult result;
  ModelParams params = init_params(splits.shape, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  result.best = Checkpoint{config, params, 0, rng_state(rng), -1.0};

  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();  // forces a shuffle before the first batch

  std::vector<const PreparedGraph*> batch;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::size_t stale = 0;
  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    batch.clear();
    for (std::size_t k = 0; k < config.batch_size; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(&splits.train[order[cursor++]]);
    }
    loss_sum += train_step(params, batch, config);
    ++loss_count;
    result.iterations_run = it;

    if (it % config.eval_interval != 0 && it != config.max_iters) continue;
    const MetricReport report = evaluate(params, splits.eval, config.workers);
    result.history.push_back({it, loss_sum / static_cast<double>(loss_count),
                              report.mean_average_precision, report.mean_roc_auc});
    loss_sum = 0.0;
    loss_count = 0;
    if (report.mean_average_precision > result.best.best_eval_map) {
      result.best = Checkpoint{config, params, it, rng_state(rng), report.mean_average_precision};
      stale = 0;
    } else if (++stale >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.final_params = std::move(params);
  return result;
}

std::string format_history(const std::vector<EvalRecord>& history) {
  std::string out = "iteration\ttrain_loss\teval_map\teval_auc\n";
  for (const auto& h : history) {
    out += std::to_string(h.iteration) + "\t" + format_double(h.train_loss) + "\t" +
           format_double(h.eval_map) + "\t" + format_double(h.eval_auc) + "\n";
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

namespace {

std::vector<SeedOutcome> run_seeds(const PreparedSplits& splits, TrainConfig cfg, std::size_t seeds) {
  std::vector<SeedOutcome> runs;
  const std::uint64_t base = cfg.seed;
  for (std::size_t s = 0; s < seeds; ++s) {
    cfg.seed = base + s;
    const TrainResult r = train(splits, cfg);
    const MetricReport test = evaluate(r.best.params, splits.test, cfg.workers);
    runs.push_back({cfg.seed, test.mean_average_precision, test.mean_roc_auc, r.iterations_run});
  }
  return runs;
}

void fill_summaries(const std::vector<SeedOutcome>& runs, Summary& map, Summary& auc) {
  std::vector<double> maps, aucs;
  for (const auto& r : runs) {
    maps.push_back(r.test_map);
    aucs.push_back(r.test_auc);
  }
  map = summarize(maps);
  auc = summarize(aucs);
}

std::string per_seed(const std::vector<SeedOutcome>& runs) {
  std::string out;
  for (std::size_t i = 0; i < runs.size(); ++i) out += (i ? "," : "") + format_double(runs[i].test_map);
  return out;
}

}  // namespace

AblationReport run_ablation(const Dataset& data, const TrainConfig& config, std::size_t seeds) {
  if (seeds == 0) throw ConfigError("ablation needs at least one seed");
  AblationReport report;
  for (Variant v : kAllVariants) {
    TrainConfig cfg = config;
    cfg.variant = v;
    const PreparedSplits splits = prepare_splits(data, cfg);
    AblationRow row;
    row.variant = v;
    row.runs = run_seeds(splits, cfg, seeds);
    fill_summaries(row.runs, row.map, row.auc);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_ablation(const AblationReport& r) {
  std::string out = "variant\tmap_mean\tmap_std\tauc_mean\tauc_std\tseeds\tmap_per_seed\n";
  for (const auto& row : r.rows) {
    out += std::string(to_string(row.variant)) + "\t" + format_double(row.map.mean) + "\t" +
           format_double(row.map.stddev) + "\t" + format_double(row.auc.mean) + "\t" +
           format_double(row.auc.stddev) + "\t" + std::to_string(row.runs.size()) + "\t" +
           per_seed(row.runs) + "\n";
  }
  return out;
}

SweepParameter parse_sweep_parameter(std::string_view name) {
  if (name == "M_a") return SweepParameter::M_a;
  if (name == "M_v") return SweepParameter::M_v;
  if (name == "M_c") return SweepParameter::M_c;
  throw ConfigError("unknown sweep parameter '" + std::string(name) + "' (expected M_a, M_v, M_c)");
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::M_a: return "M_a";
    case SweepParameter::M_v: return "M_v";
    case SweepParameter::M_c: return "M_c";
  }
  return "?";
}

SweepReport run_sweep(const Dataset& data, const TrainConfig& config, SweepParameter parameter,
                      std::span<const std::size_t> values, std::size_t seeds) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (seeds == 0) throw ConfigError("sweep needs at least one seed");
  SweepReport report;
  report.parameter = parameter;
  for (std::size_t value : values) {
    TrainConfig cfg = config;
    switch (parameter) {
      case SweepParameter::M_a: cfg.M_a = value; break;
      case SweepParameter::M_v: cfg.M_v = value; break;
      case SweepParameter::M_c: cfg.M_c = value; break;
    }
    const PreparedSplits splits = prepare_splits(data, cfg);
    SweepRow row;
    row.value = value;
    row.truncated = splits.truncated_neighborhoods > 0;
    row.runs = run_seeds(splits, cfg, seeds);
    fill_summaries(row.runs, row.map, row.auc);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_sweep(const SweepReport& r) {
  std::string out = std::string(to_string(r.parameter)) +
                    "\ttruncated\tmap_mean\tmap_std\tauc_mean\tauc_std\tseeds\tmap_per_seed\n";
  for (const auto& row : r.rows) {
    out += std::to_string(row.value) + "\t" + (row.truncated ? "yes" : "no") + "\t" +
           format_double(row.map.mean) + "\t" + format_double(row.map.stddev) + "\t" +
           format_double(row.auc.mean) + "\t" + format_double(row.auc.stddev) + "\t" +
           std::to_string(row.runs.size()) + "\t" + per_seed(row.runs) + "\n";
  }
  return out;
}

}  // namespace tmac
