// Command-line front end: synthetic data generation, diffusion precompute,
// training, and evaluation over the documented file formats.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "graphda/config.hpp"
#include "graphda/diffusion.hpp"
#include "graphda/errors.hpp"
#include "graphda/graph.hpp"
#include "graphda/io.hpp"
#include "graphda/synth.hpp"
#include "graphda/trainer.hpp"

namespace fs = std::filesystem;
using namespace graphda;

namespace {

struct DataPaths {
  std::string dir;
  std::string source_edges, source_attrs, source_labels;
  std::string target_edges, target_attrs, target_labels;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--data", dir,
                    "Dataset directory using the conventional file names");
    cmd->add_option("--source-edges", source_edges, "Source edge list");
    cmd->add_option("--source-attrs", source_attrs, "Source attribute file");
    cmd->add_option("--source-labels", source_labels, "Source label file");
    cmd->add_option("--target-edges", target_edges, "Target edge list");
    cmd->add_option("--target-attrs", target_attrs, "Target attribute file");
    cmd->add_option("--target-labels", target_labels, "Target label file");
  }

  void resolve() {
    auto pick = [this](std::string& field, const char* name) {
      if (field.empty()) {
        if (dir.empty())
          throw ValidationError(std::string("missing --data or --") + name);
        field = (fs::path(dir) / name).string();
      }
    };
    pick(source_edges, "source_edges.txt");
    pick(source_attrs, "source_attrs.txt");
    pick(source_labels, "source_labels.txt");
    pick(target_edges, "target_edges.txt");
    pick(target_attrs, "target_attrs.txt");
    pick(target_labels, "target_labels.txt");
  }

  fs::path cache_path(GraphSide side) const {
    const fs::path base = dir.empty()
                              ? fs::path(side == GraphSide::source
                                             ? source_edges
                                             : target_edges)
                                    .parent_path()
                              : fs::path(dir);
    return base / (side == GraphSide::source ? "source_diffusion.txt"
                                             : "target_diffusion.txt");
  }
};

struct LoadedPair {
  Graph source;
  Graph target;
  AttributeVocabulary vocab;
};

LoadedPair load_pair(const DataPaths& paths) {
  LoadedPair pair;
  auto source_tokens = scan_attribute_tokens(paths.source_attrs);
  auto target_tokens = scan_attribute_tokens(paths.target_attrs);
  pair.vocab = align_attributes(std::move(source_tokens),
                                std::move(target_tokens));
  const std::size_t classes = std::max(scan_num_classes(paths.source_labels),
                                       scan_num_classes(paths.target_labels));
  const std::size_t n_source = scan_num_nodes(
      paths.source_edges, paths.source_attrs, paths.source_labels);
  const std::size_t n_target = scan_num_nodes(
      paths.target_edges, paths.target_attrs, paths.target_labels);
  pair.source = load_graph(paths.source_edges, paths.source_attrs,
                           paths.source_labels, pair.vocab, GraphSide::source,
                           n_source, classes);
  pair.target = load_graph(paths.target_edges, paths.target_attrs,
                           paths.target_labels, pair.vocab, GraphSide::target,
                           n_target, classes);
  return pair;
}

// Cached diffusion if compatible, otherwise a fresh build (cache updated).
DiffusionMatrix obtain_diffusion(const Graph& graph, const fs::path& cache,
                                 double alpha, std::size_t topk, bool force) {
  if (!force && fs::exists(cache)) {
    DiffusionMatrix dm = load_diffusion(cache);
    if (dm.alpha == alpha && dm.topk == topk &&
        dm.num_nodes() == graph.num_nodes)
      return dm;
    std::cerr << "warning: " << cache.string()
              << " does not match requested parameters, recomputing\n";
  } else if (!fs::exists(cache)) {
    std::cerr << "warning: diffusion cache " << cache.string()
              << " missing, computing now\n";
  }
  DiffusionMatrix dm = build_diffusion(graph, alpha, topk);
  save_diffusion(cache, dm);
  return dm;
}

KeyValues manifest_kv(const TrainConfig& config, const AblationFlags& flags,
                      const DataPaths& paths) {
  KeyValues kv = config_to_kv(config, flags);
  kv["path_source_edges"] = paths.source_edges;
  kv["path_source_attrs"] = paths.source_attrs;
  kv["path_source_labels"] = paths.source_labels;
  kv["path_target_edges"] = paths.target_edges;
  kv["path_target_attrs"] = paths.target_attrs;
  kv["path_target_labels"] = paths.target_labels;
  return kv;
}

int cmd_synth(const SbmSpec& spec, const std::string& out_dir) {
  const fs::path dir(out_dir);
  if (fs::exists(dir) && !fs::is_empty(dir))
    throw ValidationError("output directory exists and is not empty: " +
                          out_dir);
  fs::create_directories(dir);
  SynthPair pair = generate_pair(spec);
  save_edges(dir / "source_edges.txt", pair.source);
  save_attributes(dir / "source_attrs.txt", pair.source, pair.source_tokens,
                  pair.vocab.source_index_map);
  save_labels(dir / "source_labels.txt", pair.source);
  save_edges(dir / "target_edges.txt", pair.target);
  save_attributes(dir / "target_attrs.txt", pair.target, pair.target_tokens,
                  pair.vocab.target_index_map);
  save_labels(dir / "target_labels.txt", pair.target);

  KeyValues kv;
  kv["command"] = "synth";
  kv["nodes"] = std::to_string(spec.num_nodes);
  kv["classes"] = std::to_string(spec.num_classes);
  kv["intra_prob"] = format_double(spec.intra_prob);
  kv["inter_prob"] = format_double(spec.inter_prob);
  kv["attr_dim"] = std::to_string(spec.attr_dim);
  kv["prototype_strength"] = format_double(spec.prototype_strength);
  kv["domain_shift"] = format_double(spec.domain_shift);
  kv["label_noise"] = format_double(spec.label_noise);
  kv["seed"] = std::to_string(spec.seed);
  write_manifest(dir / "manifest.txt", kv);

  std::cout << "wrote dataset to " << out_dir << " (common attribute rate "
            << format_double(common_attribute_rate(pair.vocab)) << ")\n";
  return 0;
}

int cmd_diffuse(DataPaths paths, double alpha, std::size_t topk, bool force) {
  paths.resolve();
  LoadedPair pair = load_pair(paths);
  for (auto side : {GraphSide::source, GraphSide::target}) {
    const Graph& g = side == GraphSide::source ? pair.source : pair.target;
    const fs::path cache = paths.cache_path(side);
    if (!force && fs::exists(cache)) {
      DiffusionMatrix existing = load_diffusion(cache);
      if (existing.alpha == alpha && existing.topk == topk &&
          existing.num_nodes() == g.num_nodes) {
        std::cout << cache.string() << " up to date, skipping (use --force to "
                  << "recompute)\n";
        continue;
      }
    }
    DiffusionMatrix dm = build_diffusion(g, alpha, topk);
    save_diffusion(cache, dm);
    std::cout << "wrote " << cache.string() << "\n";
  }
  return 0;
}

int run_one_training(const LoadedPair& pair, const DiffusionMatrix& ds,
                     const DiffusionMatrix& dt, const TrainConfig& config,
                     const AblationFlags& flags, const DataPaths& paths,
                     const fs::path& out_dir, bool quiet) {
  fs::create_directories(out_dir);
  ExperimentSinks sinks;
  sinks.report_csv = out_dir / "report.csv";
  sinks.checkpoint = out_dir / "checkpoint.bin";
  sinks.embeddings_source_csv = out_dir / "embeddings_source.csv";
  sinks.embeddings_target_csv = out_dir / "embeddings_target.csv";
  write_manifest(out_dir / "manifest.txt", manifest_kv(config, flags, paths));

  ExperimentReport report = run_experiment(pair.source, pair.target, ds, dt,
                                           config, flags, &sinks);
  if (!quiet) {
    const auto& last = report.epochs.back();
    std::cout << "final epoch losses: CE " << format_double(last.ce) << " CL "
              << format_double(last.cl) << " EN " << format_double(last.en)
              << "\n";
  }
  std::cout << "seed " << config.seed << " accuracy "
            << format_double(report.final_eval.accuracy) << "\n";
  return 0;
}

int cmd_train(DataPaths paths, TrainConfig config, AblationFlags flags,
              const std::string& out_dir, const std::vector<std::uint64_t>& seeds,
              std::size_t jobs) {
  paths.resolve();
  LoadedPair pair = load_pair(paths);
  DiffusionMatrix ds = obtain_diffusion(pair.source,
                                        paths.cache_path(GraphSide::source),
                                        config.alpha, config.topk, false);
  DiffusionMatrix dt = obtain_diffusion(pair.target,
                                        paths.cache_path(GraphSide::target),
                                        config.alpha, config.topk, false);

  if (seeds.size() <= 1) {
    if (seeds.size() == 1) config.seed = seeds[0];
    return run_one_training(pair, ds, dt, config, flags, paths, out_dir,
                            false);
  }

  // Seed fan-out: independent runs share the graphs and diffusion matrices
  // read-only; each run writes its own subdirectory.
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  std::vector<double> accuracies(seeds.size(), 0.0);
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      TrainConfig local = config;
      local.seed = seeds[i];
      const fs::path sub = fs::path(out_dir) / ("seed_" +
                                                std::to_string(seeds[i]));
      fs::create_directories(sub);
      ExperimentSinks sinks;
      sinks.report_csv = sub / "report.csv";
      sinks.checkpoint = sub / "checkpoint.bin";
      sinks.embeddings_source_csv = sub / "embeddings_source.csv";
      sinks.embeddings_target_csv = sub / "embeddings_target.csv";
      write_manifest(sub / "manifest.txt", manifest_kv(local, flags, paths));
      ExperimentReport report = run_experiment(pair.source, pair.target, ds,
                                               dt, local, flags, &sinks);
      accuracies[i] = report.final_eval.accuracy;
      std::lock_guard<std::mutex> lock(io_mutex);
      std::cout << "seed " << seeds[i] << " accuracy "
                << format_double(report.final_eval.accuracy) << "\n";
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs,
                                                                  seeds.size()));
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  std::cout << "mean accuracy " << format_double(mean) << "\n";
  return 0;
}

int cmd_eval(DataPaths paths, const std::string& checkpoint,
             std::string manifest_path, const std::vector<double>& gammas) {
  paths.resolve();
  if (manifest_path.empty())
    manifest_path = (fs::path(checkpoint).parent_path() / "manifest.txt")
                        .string();
  KeyValues kv = read_key_values(manifest_path);
  TrainConfig config = config_from_kv(kv, /*allow_unknown=*/true);
  AblationFlags flags = flags_from_kv(kv);

  LoadedPair pair = load_pair(paths);
  DiffusionMatrix ds = obtain_diffusion(pair.source,
                                        paths.cache_path(GraphSide::source),
                                        config.alpha, config.topk, false);
  DiffusionMatrix dt = obtain_diffusion(pair.target,
                                        paths.cache_path(GraphSide::target),
                                        config.alpha, config.topk, false);

  Graph target = pair.target.with_label_partition(
      select_labeled_per_class(pair.target, config.n_labeled, config.seed));
  Trainer trainer(pair.source, target, ds, dt, config, flags);
  restore_checkpoint(checkpoint, trainer.params().all_tensors());

  EvalResult eval = trainer.evaluate();
  std::cout << "accuracy " << format_double(eval.accuracy) << "\n";
  for (std::size_t c = 0; c < eval.per_class_total.size(); ++c) {
    const double acc =
        eval.per_class_total[c] == 0
            ? 0.0
            : static_cast<double>(eval.per_class_correct[c]) /
                  static_cast<double>(eval.per_class_total[c]);
    std::cout << "class " << c << " accuracy " << format_double(acc) << " ("
              << eval.per_class_correct[c] << "/" << eval.per_class_total[c]
              << ")\n";
  }
  for (double gamma : gammas) {
    DivergenceDiagnostic d = trainer.diagnostic(gamma);
    std::cout << "gamma " << format_double(gamma) << " source_frac "
              << format_double(d.source_frac) << " target_frac "
              << format_double(d.target_frac) << " bound "
              << format_double(d.bound) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-graph node classification with dual-view encoders, "
               "contrastive learning, and minimax-entropy adaptation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth",
                                   "Generate a paired synthetic dataset");
  SbmSpec spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--nodes", spec.num_nodes, "Nodes per domain");
  synth->add_option("--classes", spec.num_classes, "Number of classes");
  synth->add_option("--intra", spec.intra_prob, "Within-class edge probability");
  synth->add_option("--inter", spec.inter_prob, "Cross-class edge probability");
  synth->add_option("--attr-dim", spec.attr_dim, "Attributes per domain");
  synth->add_option("--prototype-strength", spec.prototype_strength,
                    "Scale of the class signal in attributes");
  synth->add_option("--domain-shift", spec.domain_shift,
                    "Prototype perturbation and vocabulary shift in [0,1]");
  synth->add_option("--label-noise", spec.label_noise,
                    "Fraction of resampled labels");
  synth->add_option("--seed", spec.seed, "Generator seed");

  // diffuse
  auto* diffuse = app.add_subcommand("diffuse",
                                     "Precompute diffusion caches");
  DataPaths diffuse_paths;
  diffuse_paths.add_options(diffuse);
  double diffuse_alpha = 0.1;
  std::size_t diffuse_topk = 20;
  bool diffuse_force = false;
  diffuse->add_option("--alpha", diffuse_alpha, "Teleport probability");
  diffuse->add_option("--topk", diffuse_topk, "Entries kept per row");
  diffuse->add_flag("--force", diffuse_force, "Recompute existing caches");

  // train
  auto* train = app.add_subcommand("train", "Train and evaluate");
  DataPaths train_paths;
  train_paths.add_options(train);
  std::string config_path, train_out = "run";
  std::vector<std::string> ablate;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  TrainConfig defaults;
  double opt_eta0 = defaults.eta0, opt_l1 = defaults.lambda1;
  double opt_l2 = defaults.lambda2_max, opt_l3 = defaults.lambda3;
  double opt_alpha = defaults.alpha, opt_temp = defaults.temperature;
  std::size_t opt_epochs = defaults.epochs, opt_batch = defaults.batch_size;
  std::size_t opt_topk = defaults.topk, opt_n = defaults.n_labeled;
  std::uint64_t opt_seed = defaults.seed;
  std::string opt_sample_sizes, opt_layer_dims;
  train->add_option("--config", config_path, "Key-value config file");
  train->add_option("--out", train_out, "Run output directory");
  auto* o_alpha = train->add_option("--alpha", opt_alpha, "Teleport probability");
  auto* o_topk = train->add_option("--topk", opt_topk, "Diffusion entries per row");
  auto* o_n = train->add_option("--n", opt_n, "Labeled target nodes per class");
  auto* o_seed = train->add_option("--seed", opt_seed, "Run seed");
  auto* o_epochs = train->add_option("--epochs", opt_epochs, "Training epochs");
  auto* o_batch = train->add_option("--batch-size", opt_batch, "Batch size");
  auto* o_eta0 = train->add_option("--eta0", opt_eta0, "Initial learning rate");
  auto* o_l1 = train->add_option("--lambda1", opt_l1, "Contrastive coefficient");
  auto* o_l2 = train->add_option("--lambda2-max", opt_l2,
                                 "Domain adaptation coefficient cap");
  auto* o_l3 = train->add_option("--lambda3", opt_l3, "Entropy coefficient");
  auto* o_temp = train->add_option("--temperature", opt_temp,
                                   "Classifier temperature");
  auto* o_ss = train->add_option("--sample-sizes", opt_sample_sizes,
                                 "Per-depth neighborhood sample sizes, e.g. 20,20");
  auto* o_ld = train->add_option("--layer-dims", opt_layer_dims,
                                 "Encoder layer dimensions, e.g. 1024/64");
  train->add_option("--ablate", ablate,
                    "Disable components: cl, gv, lv, da")
      ->check(CLI::IsMember({"cl", "gv", "lv", "da"}));
  train->add_option("--seeds", seeds, "Run several seeds (fan-out mode)");
  train->add_option("--jobs", jobs, "Parallel runs in fan-out mode");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  DataPaths eval_paths;
  eval_paths.add_options(eval);
  std::string eval_checkpoint, eval_manifest;
  std::vector<double> gammas{0.25, 0.5, 0.75, 1.0};
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")
      ->required();
  eval->add_option("--manifest", eval_manifest,
                   "Manifest file (default: next to the checkpoint)");
  eval->add_option("--gamma", gammas, "Entropy thresholds for the diagnostic");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (diffuse->parsed())
      return cmd_diffuse(diffuse_paths, diffuse_alpha, diffuse_topk,
                         diffuse_force);
    if (train->parsed()) {
      TrainConfig config;
      AblationFlags flags;
      if (!config_path.empty()) {
        KeyValues kv = read_key_values(config_path);
        config = config_from_kv(kv);
        flags = flags_from_kv(kv);
      }
      if (!o_alpha->empty()) config.alpha = opt_alpha;
      if (!o_topk->empty()) config.topk = opt_topk;
      if (!o_n->empty()) config.n_labeled = opt_n;
      if (!o_seed->empty()) config.seed = opt_seed;
      if (!o_epochs->empty()) config.epochs = opt_epochs;
      if (!o_batch->empty()) config.batch_size = opt_batch;
      if (!o_eta0->empty()) config.eta0 = opt_eta0;
      if (!o_l1->empty()) config.lambda1 = opt_l1;
      if (!o_l2->empty()) config.lambda2_max = opt_l2;
      if (!o_l3->empty()) config.lambda3 = opt_l3;
      if (!o_temp->empty()) config.temperature = opt_temp;
      if (!o_ss->empty()) config.sample_sizes = parse_size_list(opt_sample_sizes);
      if (!o_ld->empty()) config.layer_dims = parse_size_list(opt_layer_dims);
      for (const auto& a : ablate) {
        if (a == "cl") flags.disable_contrastive = true;
        if (a == "gv") flags.disable_global_view = true;
        if (a == "lv") flags.disable_local_view = true;
        if (a == "da") flags.disable_domain_adaptation = true;
      }
      if (flags.disable_global_view || flags.disable_local_view)
        flags.disable_contrastive = true;
      config.validate();
      flags.validate();
      return cmd_train(train_paths, config, flags, train_out, seeds, jobs);
    }
    if (eval->parsed())
      return cmd_eval(eval_paths, eval_checkpoint, eval_manifest, gammas);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
