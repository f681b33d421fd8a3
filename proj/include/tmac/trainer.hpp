#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmac/data_io.hpp"
#include "tmac/metrics.hpp"
#include "tmac/model.hpp"
#include "tmac/optimizer.hpp"

namespace tmac {

/// Hyperparameters. Defaults are the full-size training setup; the
/// synthetic acceptance runs override sizes and schedule explicitly.
struct TrainConfig {
  std::size_t M_a = 8;
  std::size_t M_v = 8;
  std::size_t M_c = 8;
  std::size_t layers = 4;
  std::size_t hidden = 512;
  double gamma = 2.0;
  double base_lr = 0.005;
  double decay_factor = 0.1;
  std::size_t decay_interval = 250;
  std::size_t warmup_iters = 1000;
  std::size_t batch_size = 32;
  std::size_t max_iters = 5000;
  std::size_t eval_interval = 250;
  std::size_t patience = 5;  ///< evaluations without eval-mAP improvement before stopping
  std::uint64_t seed = 0;
  Variant variant = Variant::full;
  std::size_t workers = 1;
  std::size_t audio_dim = 128;
  std::size_t video_dim = 1024;
  /// Node counts; 0 takes the dataset manifest's values.
  std::size_t n_audio = 0;
  std::size_t n_video = 0;

  /// Throws ConfigError on zero counts, non-positive lr or negative gamma.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// key=value pairs; doubles are written so that they parse back exactly.
std::map<std::string, std::string> to_key_values(const TrainConfig& c);
TrainConfig train_config_from(const std::map<std::string, std::string>& kv);
/// One "key=value" per line, in a fixed key order.
std::string describe(const TrainConfig& c);

/// Linear warm-up to base_lr over warmup_iters, then step decay by
/// decay_factor every decay_interval iterations.
double lr_at(std::size_t iteration, const TrainConfig& c);

GraphConfig graph_config(const TrainConfig& c, std::size_t n_audio, std::size_t n_video);
ModelShape model_shape(const TrainConfig& c, std::size_t n_audio, std::size_t n_video,
                       std::size_t n_classes);

/// Xavier-uniform weight matrices, pooling vectors at 1/n, bias at 1/n_classes.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct GradientResult {
  std::vector<Tensor> grads;  ///< named_parameters order, averaged over the batch
  double loss = 0.0;          ///< mean focal loss over the batch
};

/// Per-graph tapes, run on `workers` threads and reduced in batch order, so the
/// result is independent of the worker count. Throws NumericError naming the
/// event whose loss is not finite.
GradientResult compute_gradients(const ModelParams& params,
                                 std::span<const PreparedGraph* const> batch, double gamma,
                                 std::size_t workers);

/// One optimizer step at lr_at(params.adam.step + 1). Returns the batch loss.
double train_step(ModelParams& params, std::span<const PreparedGraph* const> batch,
                  const TrainConfig& config);

struct PreparedSplits {
  ModelShape shape;
  std::vector<PreparedGraph> train;
  std::vector<PreparedGraph> eval;
  std::vector<PreparedGraph> test;
  std::size_t truncated_neighborhoods = 0;  ///< graphs whose M exceeded the available nodes
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EventRecord> train;
  std::vector<EventRecord> eval;
  std::vector<EventRecord> test;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Builds and weights graphs for config.variant. Throws ConfigError when the
/// config's node counts disagree with the manifest, DataError on empty splits.
PreparedSplits prepare_splits(const Dataset& data, const TrainConfig& config);

MetricReport evaluate(const ModelParams& params, std::span<const PreparedGraph> split,
                      std::size_t workers);

struct EvalRecord {
  std::size_t iteration = 0;
  double train_loss = 0.0;  ///< mean batch loss since the previous evaluation
  double eval_map = 0.0;
  double eval_auc = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  std::size_t iteration = 0;
  std::string rng_state;
  double best_eval_map = -1.0;
};

/// Binary layout (little-endian): "TMAC", u32 version, u32-length-prefixed
/// UTF-8 block of key=value lines (config, shape, iteration, rng state,
/// best eval mAP, optimizer step), u32 record count, then per tensor:
/// u32-length-prefixed name, u32 rows, u32 cols, f64 values.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainResult {
  Checkpoint best;
  ModelParams final_params;
  std::vector<EvalRecord> history;
  std::size_t iterations_run = 0;
  bool early_stopped = false;
};

/// Runs until max_iters or until `patience` consecutive evaluations (every
/// eval_interval iterations, and at the last iteration) bring no eval-mAP
/// improvement. Returns the checkpoint with the best eval mAP.
TrainResult train(const PreparedSplits& splits, const TrainConfig& config);

/// Metric history as tab-separated text with a header line.
std::string format_history(const std::vector<EvalRecord>& history);

struct SeedOutcome {
  std::uint64_t seed = 0;
  double test_map = 0.0;
  double test_auc = 0.0;
  std::size_t iterations = 0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation (0 for one value)
};

Summary summarize(const std::vector<double>& values);

struct AblationRow {
  Variant variant = Variant::full;
  std::vector<SeedOutcome> runs;
  Summary map;
  Summary auc;
};

struct AblationReport {
  std::vector<AblationRow> rows;  ///< non_tmg, non_intraT, non_interT, full
};

/// Trains every variant with seeds config.seed, config.seed + 1, ... and
/// reports test metrics of each run's best checkpoint.
AblationReport run_ablation(const Dataset& data, const TrainConfig& config, std::size_t seeds);
std::string format_ablation(const AblationReport& r);

enum class SweepParameter { M_a, M_v, M_c };
SweepParameter parse_sweep_parameter(std::string_view name);
std::string_view to_string(SweepParameter p);

struct SweepRow {
  std::size_t value = 0;
  bool truncated = false;  ///< value exceeded the available nodes for some graph
  std::vector<SeedOutcome> runs;
  Summary map;
  Summary auc;
};

struct SweepReport {
  SweepParameter parameter = SweepParameter::M_a;
  std::vector<SweepRow> rows;
};

SweepReport run_sweep(const Dataset& data, const TrainConfig& config, SweepParameter parameter,
                      std::span<const std::size_t> values, std::size_t seeds);
std::string format_sweep(const SweepReport& r);

}  // namespace tmac
