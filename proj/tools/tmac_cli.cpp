#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "tmac/error.hpp"
#include "tmac/gradcheck.hpp"
#include "tmac/trainer.hpp"

using namespace tmac;

namespace {

enum Exit { ok = 0, usage = 1, data = 2, numeric = 3 };

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct TrainFlags {
  TrainConfig config;
  std::string variant = "full";
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  auto& c = f.config;
  app->add_option("--M_a", c.M_a, "intra-audio neighbors per node")->capture_default_str();
  app->add_option("--M_v", c.M_v, "intra-video neighbors per node")->capture_default_str();
  app->add_option("--M_c", c.M_c, "video neighbors per audio node")->capture_default_str();
  app->add_option("--layers", c.layers, "GNN layers")->capture_default_str();
  app->add_option("--hidden", c.hidden, "hidden width")->capture_default_str();
  app->add_option("--gamma", c.gamma, "focal loss exponent")->capture_default_str();
  app->add_option("--base_lr,--lr", c.base_lr, "peak learning rate")->capture_default_str();
  app->add_option("--decay_factor", c.decay_factor, "lr multiplier per decay step")->capture_default_str();
  app->add_option("--decay_interval", c.decay_interval, "iterations between decay steps")->capture_default_str();
  app->add_option("--warmup_iters", c.warmup_iters, "linear warm-up iterations")->capture_default_str();
  app->add_option("--batch_size", c.batch_size, "events per batch")->capture_default_str();
  app->add_option("--max_iters", c.max_iters, "iteration budget")->capture_default_str();
  app->add_option("--eval_interval", c.eval_interval, "iterations between evaluations")->capture_default_str();
  app->add_option("--patience", c.patience, "evaluations without improvement before stopping")
      ->capture_default_str();
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
  app->add_option("--variant", f.variant, "full, non_tmg, non_intraT or non_interT")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "non_tmg", "non_intraT", "non_interT"}));
  app->add_option("--workers", c.workers, "threads per batch (results do not depend on it)")
      ->capture_default_str();
  app->add_option("--audio_dim", c.audio_dim, "audio feature width")->capture_default_str();
  app->add_option("--video_dim", c.video_dim, "video feature width")->capture_default_str();
  app->add_option("--n_audio", c.n_audio, "audio nodes per graph (0: from manifest)")->capture_default_str();
  app->add_option("--n_video", c.n_video, "video nodes per graph (0: from manifest)")->capture_default_str();
}

TrainConfig resolve(TrainFlags& f) {
  f.config.variant = parse_variant(f.variant);
  f.config.validate();
  return f.config;
}

void print_config(const TrainConfig& c) {
  std::cout << "# config\n" << describe(c) << "# seed " << c.seed << "\n";
}

void add_spec_flags(CLI::App* app, SyntheticSpec& s) {
  app->add_option("--classes", s.n_classes, "number of classes")->capture_default_str();
  app->add_option("--events_per_class", s.events_per_class, "events per class")->capture_default_str();
  app->add_option("--duration_ms", s.duration_ms, "clip length")->capture_default_str();
  app->add_option("--audio_window_ms", s.audio_window_ms, "audio segment window")->capture_default_str();
  app->add_option("--audio_stride_ms", s.audio_stride_ms, "audio segment stride")->capture_default_str();
  app->add_option("--video_chunk_ms", s.video_chunk_ms, "video chunk length")->capture_default_str();
  app->add_option("--audio_dim", s.audio_dim, "audio feature width")->capture_default_str();
  app->add_option("--video_dim", s.video_dim, "video feature width")->capture_default_str();
  app->add_option("--burst_width", s.burst_width, "audio segments per burst")->capture_default_str();
  app->add_option("--motif_gap", s.motif_gap, "audio segments between the two bursts")->capture_default_str();
  app->add_option("--lag_ms", s.lag_ms, "base video lag")->capture_default_str();
  app->add_option("--video_burst_width", s.video_burst_width, "video chunks per burst")->capture_default_str();
  app->add_option("--burst_amplitude", s.burst_amplitude, "burst strength")->capture_default_str();
  app->add_option("--amplitude_jitter", s.amplitude_jitter, "relative per-burst amplitude spread")->capture_default_str();
  app->add_option("--noise_sigma", s.noise_sigma, "feature noise")->capture_default_str();
  app->add_option("--margin", s.margin, "free audio segments at each edge")->capture_default_str();
  app->add_option("--distractors", s.distractors, "add lone class-independent bursts")->capture_default_str();
  app->add_option("--distractor_gap_ms", s.distractor_gap_ms, "minimum distance between bursts")->capture_default_str();
  app->add_option("--seed", s.seed, "random seed")->capture_default_str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

std::string metrics_text(const MetricReport& r, const std::vector<std::string>& names) {
  std::string out = "mAP\t" + num(r.mean_average_precision) + "\nAUC\t" + num(r.mean_roc_auc) + "\n";
  out += "class\tAP\tAUC\n";
  for (const auto& c : r.per_class) {
    const std::string name = c.class_index < names.size() ? names[c.class_index] : std::to_string(c.class_index);
    out += name + "\t" + num(c.average_precision) + "\t" + num(c.roc_auc) + "\n";
  }
  for (auto c : r.excluded_classes) out += "excluded\t" + std::to_string(c) + "\n";
  return out;
}

std::vector<const std::vector<EventRecord>*> pick_splits(const Dataset& d, const std::string& split) {
  if (split == "all") return {&d.train, &d.eval, &d.test};
  switch (parse_split(split)) {
    case Split::train: return {&d.train};
    case Split::eval: return {&d.eval};
    case Split::test: return {&d.test};
  }
  return {};
}

struct Stats {
  std::size_t n = 0;
  double sum = 0, min = 0, max = 0;
  void add(double v) {
    min = n ? std::min(min, v) : v;
    max = n ? std::max(max, v) : v;
    sum += v;
    ++n;
  }
  std::string line(const std::string& name) const {
    return name + "\tmean=" + num(n ? sum / static_cast<double>(n) : 0.0) + "\tmin=" + num(min) +
           "\tmax=" + num(max) + "\n";
  }
};

int cmd_construct(const std::string& manifest, const std::string& split, TrainFlags& f) {
  const TrainConfig c = resolve(f);
  print_config(c);
  const Dataset d = load_dataset(manifest);
  const std::size_t n_a = c.n_audio ? c.n_audio : d.manifest.n_audio;
  const std::size_t n_v = c.n_video ? c.n_video : d.manifest.n_video;
  const GraphConfig gc = graph_config(c, n_a, n_v);
  Stats deg_a, deg_v, deg_c, span_a, span_c;
  std::size_t graphs = 0, invalid = 0, truncated = 0;
  for (const auto* records : pick_splits(d, split)) {
    for (const auto& r : *records) {
      const EventGraph g = build_event_graph(r, gc);
      ++graphs;
      const ValidationReport report = validate_graph(g);
      if (!report.ok()) {
        ++invalid;
        for (const auto& v : report.violations) std::cerr << g.event_id << ": " << v.message << "\n";
      }
      truncated += g.meta.truncated_audio || g.meta.truncated_video || g.meta.truncated_cross;
      auto degrees = [&](const Adjacency& adj, Stats& deg, Stats* spans) {
        for (const auto& row : adj.rows) {
          if (row.neighbors.empty()) continue;
          deg.add(static_cast<double>(row.neighbors.size()));
          if (!spans) continue;
          std::uint32_t lo = row.neighbors.front().edge_timestamp_ms, hi = lo;
          for (const auto& nb : row.neighbors) {
            lo = std::min(lo, nb.edge_timestamp_ms);
            hi = std::max(hi, nb.edge_timestamp_ms);
          }
          spans->add(static_cast<double>(hi - lo));
        }
      };
      degrees(g.audio_adj, deg_a, &span_a);
      degrees(g.video_adj, deg_v, nullptr);
      degrees(g.cross_adj, deg_c, &span_c);
    }
  }
  std::cout << "graphs\t" << graphs << "\ninvalid\t" << invalid << "\ntruncated\t" << truncated << "\n"
            << deg_a.line("degree_audio") << deg_v.line("degree_video") << deg_c.line("degree_cross")
            << span_a.line("edge_time_span_audio_ms") << span_c.line("edge_time_span_cross_ms");
  return invalid == 0 ? ok : data;
}

int cmd_weights(const std::string& manifest, const std::string& event, TrainFlags& f) {
  const TrainConfig c = resolve(f);
  print_config(c);
  const DatasetManifest m = read_manifest(manifest);
  auto it = std::find_if(m.entries.begin(), m.entries.end(),
                         [&](const ManifestEntry& e) { return e.event_id == event; });
  if (it == m.entries.end()) throw DataError("event '" + event + "' not in manifest");
  const EventRecord r = read_record(m.base_dir / it->path);
  const EventGraph g =
      build_event_graph(r, graph_config(c, c.n_audio ? c.n_audio : m.n_audio, c.n_video ? c.n_video : m.n_video));
  const WeightedGraph w = weight_graph(g, c.variant);
  std::cout << "kind\ttarget\tneighbor\tedge_timestamp_ms\tweight\n";
  for (const WeightedAdjacency* adj : {&w.audio, &w.video, &w.cross}) {
    for (const auto& row : adj->rows) {
      for (const auto& nb : row.neighbors) {
        std::cout << to_string(adj->kind) << '\t' << row.source.index << '\t' << nb.node.index << '\t'
                  << nb.edge_timestamp_ms << '\t' << num(nb.weight) << '\n';
      }
    }
  }
  return ok;
}

int cmd_train(const std::string& manifest, const std::string& out, const std::string& final_out,
              const std::string& history, TrainFlags& f) {
  const TrainConfig c = resolve(f);
  print_config(c);
  const Dataset d = load_dataset(manifest);
  const PreparedSplits splits = prepare_splits(d, c);
  std::cout << "# params " << count_params(make_model(splits.shape)) << "\n";
  const TrainResult r = train(splits, c);
  write_text(history, format_history(r.history));
  if (!out.empty()) save_checkpoint(out, r.best);
  if (!final_out.empty()) {
    Checkpoint last{c, r.final_params, r.iterations_run, {}, r.best.best_eval_map};
    save_checkpoint(final_out, last);
  }
  std::cout << "# iterations " << r.iterations_run << (r.early_stopped ? " (early stop)" : "") << "\n"
            << "# best_iteration " << r.best.iteration << "\n"
            << "# best_eval_map " << num(r.best.best_eval_map) << "\n";
  const MetricReport test = evaluate(r.best.params, splits.test, c.workers);
  std::cout << "# test\n" << metrics_text(test, d.manifest.class_names);
  return ok;
}

int cmd_eval(const std::string& manifest, const std::string& checkpoint, const std::string& split,
             std::size_t workers) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  TrainConfig c = ck.config;
  c.workers = workers;
  print_config(c);
  const Dataset d = load_dataset(manifest);
  const PreparedSplits splits = prepare_splits(d, c);
  if (!(splits.shape == ck.params.shape)) throw ConfigError("checkpoint shape does not match the dataset");
  const Split which = parse_split(split);
  const std::vector<PreparedGraph>& chosen =
      which == Split::train ? splits.train : (which == Split::eval ? splits.eval : splits.test);
  std::cout << metrics_text(evaluate(ck.params, chosen, workers), d.manifest.class_names);
  return ok;
}

std::vector<std::size_t> parse_values(const std::string& list) {
  std::vector<std::size_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t v = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || v == 0) {
      throw ConfigError("bad sweep value '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("empty sweep value list");
  return out;
}

int cmd_inspect(const std::string& record, const std::string& checkpoint, const std::string& manifest) {
  int shown = 0;
  if (!record.empty()) {
    const EventRecord r = read_record(record);
    std::cout << "record\t" << r.event_id << "\nclasses\t" << r.label.size() << "\npositive";
    for (std::size_t c = 0; c < r.label.size(); ++c)
      if (r.label[c]) std::cout << '\t' << c;
    std::cout << "\naudio\t" << r.audio.count() << " x " << r.audio.dim << "\nvideo\t" << r.video.count()
              << " x " << r.video.dim << "\n";
    ++shown;
  }
  if (!checkpoint.empty()) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::cout << "# config\n" << describe(ck.config) << "iteration\t" << ck.iteration << "\nbest_eval_map\t"
              << num(ck.best_eval_map) << "\nadam_step\t" << ck.params.adam.step << "\nparams\t"
              << count_params(ck.params) << "\n";
    for (const auto& np : named_parameters(ck.params))
      std::cout << np.name << '\t' << np.tensor->shape_string() << '\n';
    ++shown;
  }
  if (!manifest.empty()) {
    const DatasetManifest m = read_manifest(manifest);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : m.entries) ++counts[static_cast<int>(e.split)];
    std::cout << "events\t" << m.entries.size() << "\nclasses\t" << m.n_classes << "\nn_audio\t" << m.n_audio
              << "\nn_video\t" << m.n_video << "\ntrain\t" << counts[0] << "\neval\t" << counts[1] << "\ntest\t"
              << counts[2] << "\n";
    ++shown;
  }
  if (shown == 0) throw CLI::ValidationError("inspect", "give --record, --checkpoint or --manifest");
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal multi-modal graph learning for acoustic event classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SyntheticSpec spec;
  std::string out_dir;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic temporal dataset");
  synth->add_option("--out", out_dir, "output directory")->required();
  add_spec_flags(synth, spec);

  TrainFlags flags;
  std::string manifest, split = "all", event, checkpoint, final_out, history, report, param, values, record;
  std::size_t seeds = 5;

  auto* construct = app.add_subcommand("construct", "Build and validate graphs, print statistics");
  construct->add_option("--manifest", manifest, "dataset manifest")->required();
  construct->add_option("--split", split, "train, eval, test or all")->capture_default_str();
  add_train_flags(construct, flags);

  auto* weights = app.add_subcommand("weights-dump", "Print the temporal weight of every edge of one event");
  weights->add_option("--manifest", manifest, "dataset manifest")->required();
  weights->add_option("--event", event, "event id")->required();
  add_train_flags(weights, flags);

  auto* train_cmd = app.add_subcommand("train", "Train on a manifest");
  train_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  train_cmd->add_option("--out", checkpoint, "best checkpoint path");
  train_cmd->add_option("--final-out", final_out, "checkpoint of the last iteration");
  train_cmd->add_option("--history", history, "metric history file (default stdout)");
  add_train_flags(train_cmd, flags);

  std::size_t eval_workers = 1;
  std::string eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--manifest", manifest, "dataset manifest")->required();
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--split", eval_split, "train, eval or test")->capture_default_str();
  eval_cmd->add_option("--workers", eval_workers, "threads")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train the four variants over several seeds");
  ablate->add_option("--manifest", manifest, "dataset manifest")->required();
  ablate->add_option("--seeds", seeds, "runs per variant")->capture_default_str();
  ablate->add_option("--report", report, "report file (default stdout)");
  add_train_flags(ablate, flags);

  auto* sweep = app.add_subcommand("sweep", "Vary one neighbor count");
  sweep->add_option("--manifest", manifest, "dataset manifest")->required();
  sweep->add_option("--param", param, "M_a, M_v or M_c")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds, "runs per value")->capture_default_str();
  sweep->add_option("--report", report, "report file (default stdout)");
  add_train_flags(sweep, flags);

  GradcheckConfig gc;
  double tolerance = 1e-4;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  grad->add_option("--seed", gc.seed, "random seed")->capture_default_str();
  grad->add_option("--graphs", gc.graphs, "random graphs")->capture_default_str();
  grad->add_option("--max_nodes", gc.max_nodes, "nodes per modality")->capture_default_str();
  grad->add_option("--hidden", gc.hidden, "hidden width")->capture_default_str();
  grad->add_option("--layers", gc.layers, "GNN layers")->capture_default_str();
  grad->add_option("--step", gc.step, "finite-difference step")->capture_default_str();
  grad->add_option("--tolerance", tolerance, "maximum relative error")->capture_default_str();

  auto* inspect = app.add_subcommand("inspect", "Summarize a record, checkpoint or manifest");
  inspect->add_option("--record", record, "record file");
  inspect->add_option("--checkpoint", checkpoint, "checkpoint file");
  inspect->add_option("--manifest", manifest, "manifest file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (synth->parsed()) {
      std::cout << "# seed " << spec.seed << "\n";
      const DatasetManifest m = generate_synthetic(spec, out_dir);
      std::cout << "manifest\t" << (std::filesystem::path(out_dir) / "manifest.txt").string() << "\nevents\t"
                << m.entries.size() << "\nn_audio\t" << m.n_audio << "\nn_video\t" << m.n_video << "\n";
      return ok;
    }
    if (construct->parsed()) return cmd_construct(manifest, split, flags);
    if (weights->parsed()) return cmd_weights(manifest, event, flags);
    if (train_cmd->parsed()) return cmd_train(manifest, checkpoint, final_out, history, flags);
    if (eval_cmd->parsed()) return cmd_eval(manifest, checkpoint, eval_split, eval_workers);
    if (ablate->parsed()) {
      const TrainConfig c = resolve(flags);
      print_config(c);
      const AblationReport r = run_ablation(load_dataset(manifest), c, seeds);
      write_text(report, format_ablation(r));
      return ok;
    }
    if (sweep->parsed()) {
      const TrainConfig c = resolve(flags);
      print_config(c);
      const SweepParameter p = parse_sweep_parameter(param);
      const auto v = parse_values(values);
      write_text(report, format_sweep(run_sweep(load_dataset(manifest), c, p, v, seeds)));
      return ok;
    }
    if (grad->parsed()) {
      std::cout << "# seed " << gc.seed << "\n";
      const GradcheckReport r = run_gradcheck(gc);
      std::cout << "graphs\t" << r.graphs << "\nentries\t" << r.entries_checked << "\nmax_rel_error\t"
                << num(r.max_rel_error) << "\nworst\t" << r.worst_parameter << "[" << r.worst_index
                << "]\tanalytic=" << num(r.worst_analytic) << "\tnumeric=" << num(r.worst_numeric) << "\n";
      if (r.max_rel_error > tolerance) {
        std::cerr << "gradient check failed: " << num(r.max_rel_error) << " > " << num(tolerance) << "\n";
        return numeric;
      }
      return ok;
    }
    if (inspect->parsed()) return cmd_inspect(record, checkpoint, manifest);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return usage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return data;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return data;
  }
  return usage;
}
