// cliquemine: command-line front end for the clique-mining library.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "cliquemining/config_json.hpp"
#include "cliquemining/dataset.hpp"
#include "cliquemining/embedder.hpp"
#include "cliquemining/experiment.hpp"
#include "cliquemining/mining.hpp"
#include "cliquemining/report.hpp"
#include "cliquemining/retrieval.hpp"
#include "cliquemining/synth.hpp"

namespace fs = std::filesystem;
using namespace cliquemining;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flags are bound to shadow values and copied into the config only when
/// given, so flags override the config file, which overrides defaults.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* option(const std::string& name, T& target, const std::string& desc) {
    auto shadow = std::make_shared<T>(target);
    CLI::Option* opt = app_->add_option(name, *shadow, desc)->capture_default_str();
    apply_.push_back([opt, shadow, &target] {
      if (opt->count() > 0) target = *shadow;
    });
    return opt;
  }

  CLI::Option* flag(const std::string& name, bool& target, bool value, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(name, desc);
    apply_.push_back([opt, &target, value] {
      if (opt->count() > 0) target = value;
    });
    return opt;
  }

  template <typename E>
  CLI::Option* choice(const std::string& name, E& target, std::function<E(const std::string&)> parse,
                      std::function<std::string(E)> show, const std::vector<std::string>& allowed,
                      const std::string& desc) {
    auto shadow = std::make_shared<std::string>(show(target));
    CLI::Option* opt =
        app_->add_option(name, *shadow, desc)->check(CLI::IsMember(allowed))->capture_default_str();
    apply_.push_back([opt, shadow, &target, parse] {
      if (opt->count() > 0) target = parse(*shadow);
    });
    return opt;
  }

  void apply() const {
    for (const auto& f : apply_) f();
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void()>> apply_;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_seed) {
  cmd->add_option("--config", c.config_path, "JSON config file (flags override it)")->check(CLI::ExistingFile);
  auto* s = cmd->add_option("--seed", c.seed, "master seed");
  if (needs_seed) s->required();
  cmd->add_option("--threads", c.threads, "worker thread cap (0: hardware)")->capture_default_str();
}

void bind_synth(Binder& b, SynthConfig& s) {
  b.option("--num-cities", s.num_cities, "cities in the world");
  b.option("--sequences-per-city", s.sequences_per_city, "sequences (route traversals) per city");
  b.option("--paths-per-city", s.paths_per_city, "routes per city (0: sequences / conditions)");
  b.option("--path-length", s.path_length, "route length in meters");
  b.option("--frame-spacing", s.frame_spacing, "meters between consecutive frames");
  b.option("--raw-dim", s.raw_dim, "raw feature dimension");
  b.option("--spatial-length-scale", s.spatial_length_scale, "coarse appearance length scale (m)");
  b.option("--fine-length-scale", s.fine_length_scale, "fine appearance length scale (m, 0 disables)");
  b.option("--appearance-noise-sigma", s.appearance_noise_sigma, "per-dimension i.i.d. noise");
  b.option("--num-conditions", s.num_conditions, "capture conditions (e.g. seasons)");
  b.option("--condition-offset-sigma", s.condition_offset_sigma, "per-dimension condition offset scale");
  b.option("--city-extent", s.city_extent, "side of each city's square (m)");
  b.option("--first-city", s.first_city, "index of the first city (held-out cities use later indices)");
  b.option("--field-seed", s.field_seed, "appearance-field seed (defaults to --seed)");
  b.option("--normalize", s.normalize, "store L2-normalized features");
}

void bind_sparse(Binder& b, SparseConfig& s) {
  b.option("--num-groups", s.num_groups, "sparse place groups");
  b.option("--group-size", s.group_size, "frames per sparse group");
  b.option("--group-radius", s.group_radius, "sparse group radius (m)");
}

void bind_mining(Binder& b, MiningConfig& m) {
  b.option("--S", m.S, "sequences sampled besides the reference");
  b.option("--tau", m.tau, "graph edge threshold (m)");
  b.option("--N", m.N, "places per batch");
  b.option("--K", m.K, "images per place");
  b.option("--clique-fraction", m.clique_fraction, "fraction of places mined as cliques");
  b.option("--num-batches", m.num_batches, "batches in the offline collection");
  b.choice<SamplingMode>(
      "--sampling-mode", m.sampling_mode, parse_sampling_mode, [](SamplingMode v) { return to_string(v); },
      {"weighted", "most-similar", "uniform"}, "companion sequence sampling");
  b.option("--similarity-temperature", m.similarity_temperature, "softmax temperature for weighted sampling");
  b.option("--max-graph-restarts", m.max_graph_restarts, "graph rebuilds before declaring infeasibility");
}

void bind_ms(Binder& b, MsParams& p) {
  b.option("--alpha", p.alpha, "positive-pair sharpness");
  b.option("--beta", p.beta, "negative-pair sharpness");
  b.option("--lambda", p.lambda, "similarity margin base");
  b.option("--epsilon", p.epsilon, "pair mining margin");
  b.flag("--no-ms-mining", p.mining, false, "use every pair instead of mined pairs");
}

void bind_train(Binder& b, TrainConfig& t) {
  b.option("--epochs", t.epochs, "passes over the batch collection");
  b.option("--learning-rate", t.learning_rate, "gradient step size");
  b.option("--momentum", t.momentum, "heavy-ball momentum");
  b.choice<InitMode>(
      "--init", t.init, parse_init_mode, [](InitMode v) { return to_string(v); }, {"identity", "gaussian"},
      "initial W");
  b.option("--out-dim", t.out_dim, "embedding dimension (0: raw dimension)");
  b.flag("--shuffle", t.shuffle, true, "reshuffle batch order every epoch");
  b.flag("--recompute-cliques", t.recompute_cliques, true, "re-mine the clique batches every epoch");
}

void bind_eval(Binder& b, EvalConfig& e, bool curve, bool gds) {
  b.option("--threshold", e.threshold, "decision threshold (meters or frames)");
  b.option("--k", e.ks, "recall cutoffs")->delimiter(',');
  b.choice<ThresholdMode>(
      "--mode", e.mode, parse_threshold_mode, [](ThresholdMode v) { return to_string(v); }, {"meters", "frames"},
      "correctness criterion");
  if (curve) b.option("--thresholds", e.curve_thresholds, "ascending curve thresholds")->delimiter(',');
  if (gds) {
    b.option("--gds-edges", e.gds_edges, "GDS bin edges in meters, starting at 0")->delimiter(',');
    b.option("--pair-budget", e.gds_pair_budget, "sampled query-database pairs (0: all)");
    b.option("--slope-range", e.slope_range, "GDS slope range (m)");
    b.option("--std-range", e.std_range, "GDS std range (m)");
    b.option("--ordering-trials", e.ordering_trials, "ordering-probability Monte Carlo trials");
  }
}

ExperimentConfig load_config(const Common& c) {
  if (c.config_path.empty()) return default_experiment_config();
  try {
    return load_experiment_config(c.config_path);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::size_t thread_count(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

fs::path manifest_of(const std::string& prefix) { return prefix + ".jsonl"; }
fs::path embeddings_of(const std::string& prefix) { return prefix + ".gemb"; }

Dataset load_prefix(const std::string& prefix) { return load_dataset(manifest_of(prefix), embeddings_of(prefix)); }

void save_prefix(const Dataset& ds, const fs::path& prefix, std::vector<fs::path>& written) {
  const fs::path m = prefix.string() + ".jsonl";
  const fs::path e = prefix.string() + ".gemb";
  save_dataset(ds, m, e);
  written.push_back(m);
  written.push_back(e);
}

void list_files(const std::vector<fs::path>& files) {
  for (const auto& f : files) fmt::print("{}\n", f.string());
}

template <typename T>
void validate_usage(const T& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

// Seed for subcommands that draw random numbers.
std::uint64_t require_seed(const Common& c) {
  if (!c.seed) throw UsageError("--seed is required");
  return *c.seed;
}


int run_synth(ExperimentConfig& cfg, const std::string& kind, const std::string& out) {
  validate_usage(cfg.world);
  fs::create_directories(out);
  std::vector<fs::path> written;
  if (kind == "world") {
    save_prefix(generate_world(cfg.world), fs::path(out) / "world", written);
  } else if (kind == "benchmark") {
    const BenchmarkPair pair = make_dense_benchmark(cfg.world);
    save_prefix(pair.database, fs::path(out) / "database", written);
    save_prefix(pair.queries, fs::path(out) / "queries", written);
  } else {
    save_prefix(make_sparse_source(cfg.world, cfg.sparse), fs::path(out) / "sparse", written);
  }
  list_files(written);
  return 0;
}

int run_mine(ExperimentConfig& cfg, const std::string& dataset, const std::string& sparse, bool random_places,
             const std::string& out, std::size_t threads) {
  validate_usage(cfg.mining);
  if (!random_places && dataset.empty()) throw UsageError("mine: --dataset is required unless --random-places");
  const bool needs_sparse = random_places || cfg.mining.clique_places() < cfg.mining.N;
  if (needs_sparse && sparse.empty()) throw UsageError("mine: --sparse is required when places come from it");
  std::optional<Dataset> dense;
  std::optional<Dataset> sparse_ds;
  if (!dataset.empty()) dense = load_prefix(dataset);
  if (!sparse.empty()) sparse_ds = load_prefix(sparse);

  BatchCollection c;
  c.config = cfg.mining;
  if (dense) c.dataset_fingerprint = fingerprint(*dense);
  if (sparse_ds) c.sparse_fingerprint = fingerprint(*sparse_ds);
  c.batches = random_places ? compile_random_collection(*sparse_ds, cfg.mining, threads)
                            : compile_batch_collection(*dense, sparse_ds ? &*sparse_ds : nullptr, cfg.mining, threads);
  const fs::path path(out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_batch_collection(c, path);
  list_files({path});
  return 0;
}

int run_train(ExperimentConfig& cfg, const std::string& dataset, const std::string& sparse,
              const std::string& batches_path, const std::string& out, std::size_t threads) {
  validate_usage(cfg.ms);
  validate_usage(cfg.train);
  const BatchCollection collection = load_batch_collection(batches_path);
  bool uses_dense = false, uses_sparse = false;
  for (const auto& b : collection.batches) {
    for (const auto& p : b.places) (p.provenance == Provenance::clique ? uses_dense : uses_sparse) = true;
  }
  if (uses_dense && dataset.empty()) throw UsageError("train: batches use clique places; --dataset is required");
  if (uses_sparse && sparse.empty()) throw UsageError("train: batches use sparse places; --sparse is required");

  std::optional<Dataset> dense;
  std::optional<Dataset> sparse_ds;
  Eigen::MatrixXd dense_raw, sparse_raw;
  RawSources raw;
  if (!dataset.empty()) {
    dense = load_prefix(dataset);
    if (!collection.dataset_fingerprint.empty() && fingerprint(*dense) != collection.dataset_fingerprint) {
      throw std::runtime_error("train: --dataset does not match the dataset the batches were mined from");
    }
    dense_raw = as_double(dense->embeddings());
    raw.dense = &dense_raw;
  }
  if (!sparse.empty()) {
    sparse_ds = load_prefix(sparse);
    if (!collection.sparse_fingerprint.empty() && fingerprint(*sparse_ds) != collection.sparse_fingerprint) {
      throw std::runtime_error("train: --sparse does not match the sparse source the batches were mined from");
    }
    sparse_raw = as_double(sparse_ds->embeddings());
    raw.sparse = &sparse_raw;
  }

  BatchRecompute recompute;
  if (cfg.train.recompute_cliques && dense && uses_dense) {
    recompute = [&](std::size_t epoch, const ToyEmbedder& e) {
      const Dataset view(dense->frames(), embed(e, dense_raw), dense->metadata());
      MiningConfig m = collection.config;
      m.seed = derive_seed(collection.config.seed, kStreamTrain, epoch);
      return compile_batch_collection(view, sparse_ds ? &*sparse_ds : nullptr, m, threads);
    };
  }
  const TrainResult result = train_toy_embedder(raw, collection.batches, cfg.ms, cfg.train, recompute);

  fs::create_directories(out);
  const fs::path emb = fs::path(out) / "embedder.bin";
  const fs::path trace = fs::path(out) / "loss_trace.csv";
  save_embedder(result.embedder, emb);
  write_text(trace, trace_csv(result.trace));
  list_files({emb, trace});
  return 0;
}

struct Loaded {
  Dataset database;
  Dataset queries;
  EmbeddingMatrix db_emb;
  EmbeddingMatrix q_emb;
};

Loaded load_eval_inputs(const std::string& database, const std::string& queries, const std::string& embedder) {
  Loaded l{load_prefix(database), load_prefix(queries), {}, {}};
  if (embedder.empty()) {
    l.db_emb = l.database.embeddings();
    l.q_emb = l.queries.embeddings();
  } else {
    const ToyEmbedder e = load_embedder(embedder);
    l.db_emb = embed(e, l.database.embeddings());
    l.q_emb = embed(e, l.queries.embeddings());
  }
  return l;
}

int run_recall(ExperimentConfig& cfg, const std::string& database, const std::string& queries,
               const std::string& embedder, const std::string& out, bool curve, std::size_t threads) {
  if (cfg.eval.ks.empty()) throw UsageError("--k needs at least one value");
  for (std::size_t k : cfg.eval.ks) {
    if (k == 0) throw UsageError("--k values must be >= 1");
  }
  if (curve && !std::is_sorted(cfg.eval.curve_thresholds.begin(), cfg.eval.curve_thresholds.end())) {
    throw UsageError("--thresholds must be ascending");
  }
  const Loaded l = load_eval_inputs(database, queries, embedder);
  const std::size_t kmax = *std::max_element(cfg.eval.ks.begin(), cfg.eval.ks.end());
  const RetrievalResult res = knn_retrieve(l.q_emb, l.db_emb, kmax, threads);
  const GeoInfo qg = geo_info(l.queries);
  const GeoInfo dg = geo_info(l.database);
  ReportSet reports;
  if (curve) {
    reports.recalls.push_back(
        {"curve", recall_vs_threshold_curve(res, qg, dg, cfg.eval.curve_thresholds, cfg.eval.ks, cfg.eval.mode)});
  } else {
    reports.recalls.push_back({"recall", recall_at_k(res, qg, dg, cfg.eval.threshold, cfg.eval.ks, cfg.eval.mode)});
  }
  list_files(emit_reports(reports, out));
  return 0;
}

int run_gds(ExperimentConfig& cfg, std::uint64_t seed, const std::string& database, const std::string& queries,
            const std::string& embedder, const std::string& out) {
  const Loaded l = load_eval_inputs(database, queries, embedder);
  const GeoInfo qg = geo_info(l.queries);
  const GeoInfo dg = geo_info(l.database);
  const std::size_t budget = cfg.eval.gds_pair_budget == 0 ? std::max<std::size_t>(1, qg.size() * dg.size())
                                                           : cfg.eval.gds_pair_budget;
  ReportSet reports;
  const Eigen::MatrixXd dd = as_double(l.db_emb);
  try {
    reports.gds.push_back(
        {"gds", gds_profile(as_double(l.q_emb), qg.positions, dd, dg.positions, cfg.eval.gds_edges, budget, seed)});
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.eval.ordering_trials > 0) {
    reports.orderings.push_back({"ordering", ordering_probability(dd, dg.positions, cfg.eval.ordering_trials, seed)});
  }
  list_files(emit_reports(reports, out));
  return 0;
}

int run_compare(ExperimentConfig& cfg, bool tau_sweep, bool ablate_mining) {
  validate_usage(cfg);
  std::vector<ArmSpec> arms{{"clique", ArmKind::clique, {}, {}, {}, {}}, {"random", ArmKind::random, {}, {}, {}, {}}};
  if (tau_sweep) {
    for (double tau : {10.0, 15.0, 20.0, 25.0, 30.0}) {
      arms.push_back({fmt::format("clique-tau{}", tau), ArmKind::clique, tau, {}, {}, {}});
    }
  }
  if (ablate_mining) arms.push_back({"clique-no-ms-mining", ArmKind::clique, {}, false, {}, {}});
  const ComparisonSummary s = run_comparison(cfg, arms);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const std::vector<fs::path> files{out / "compare.csv", out / "summary.csv", out / "config.json"};
  write_text(files[0], comparison_csv(s));
  write_text(files[1], comparison_summary_csv(s));
  write_text(files[2], experiment_config_to_json(cfg));
  list_files(files);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cliquemine: clique-based batch mining, multi-similarity training and GDS diagnostics"};
  app.require_subcommand(1);
  ExperimentConfig cfg = default_experiment_config();

  Common synth_c;
  std::string synth_kind = "world", synth_out;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic world, benchmark pair or sparse source");
  add_common(synth, synth_c, true);
  Binder synth_b(synth);
  bind_synth(synth_b, cfg.world);
  bind_sparse(synth_b, cfg.sparse);
  synth->add_option("--kind", synth_kind, "world | benchmark | sparse")
      ->check(CLI::IsMember({"world", "benchmark", "sparse"}))
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  Common mine_c;
  std::string mine_dataset, mine_sparse, mine_out;
  bool mine_random = false;
  CLI::App* mine = app.add_subcommand("mine", "compile an offline batch collection");
  add_common(mine, mine_c, true);
  Binder mine_b(mine);
  bind_mining(mine_b, cfg.mining);
  mine->add_option("--dataset", mine_dataset, "dense dataset prefix (<prefix>.jsonl, <prefix>.gemb)");
  mine->add_option("--sparse", mine_sparse, "sparse source prefix");
  mine->add_flag("--random-places", mine_random, "random-place baseline: every place from the sparse source");
  mine->add_option("--out", mine_out, "batch collection file")->required();

  Common train_c;
  std::string train_dataset, train_sparse, train_batches, train_out;
  CLI::App* train = app.add_subcommand("train", "train the toy embedder on a batch collection");
  add_common(train, train_c, true);
  Binder train_b(train);
  bind_ms(train_b, cfg.ms);
  bind_train(train_b, cfg.train);
  train->add_option("--dataset", train_dataset, "dense dataset prefix (raw features)");
  train->add_option("--sparse", train_sparse, "sparse source prefix");
  train->add_option("--batches", train_batches, "batch collection file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "output directory")->required();

  struct EvalInputs {
    Common common;
    std::string database, queries, embedder, out;
  };
  auto add_eval_inputs = [](CLI::App* cmd, EvalInputs& in, bool needs_seed) {
    add_common(cmd, in.common, needs_seed);
    cmd->add_option("--database", in.database, "database dataset prefix")->required();
    cmd->add_option("--queries", in.queries, "query dataset prefix")->required();
    cmd->add_option("--embedder", in.embedder, "trained embedder (default: stored features as-is)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", in.out, "output directory")->required();
  };
  EvalInputs eval_in, curve_in, gds_in;
  CLI::App* eval = app.add_subcommand("eval", "recall@K at a decision threshold");
  add_eval_inputs(eval, eval_in, false);
  Binder eval_b(eval);
  bind_eval(eval_b, cfg.eval, false, false);
  CLI::App* curve = app.add_subcommand("curve", "recall@K against the decision threshold");
  add_eval_inputs(curve, curve_in, false);
  Binder curve_b(curve);
  bind_eval(curve_b, cfg.eval, true, false);
  CLI::App* gds = app.add_subcommand("gds", "descriptor vs geographic distance profile and ordering probability");
  add_eval_inputs(gds, gds_in, true);
  Binder gds_b(gds);
  bind_eval(gds_b, cfg.eval, false, true);

  Common compare_c;
  bool tau_sweep = false, ablate_mining = false;
  CLI::App* compare = app.add_subcommand("compare", "clique-mined vs random-place training over seeds");
  add_common(compare, compare_c, true);
  Binder compare_b(compare);
  bind_synth(compare_b, cfg.world);
  bind_sparse(compare_b, cfg.sparse);
  bind_mining(compare_b, cfg.mining);
  bind_ms(compare_b, cfg.ms);
  bind_train(compare_b, cfg.train);
  bind_eval(compare_b, cfg.eval, true, true);
  compare_b.option("--num-seeds", cfg.num_seeds, "seeds per arm");
  compare_b.option("--benchmark-cities", cfg.benchmark_cities, "held-out benchmark cities");
  compare_b.option("--out", cfg.output_dir, "output directory");
  compare->add_flag("--tau-sweep", tau_sweep, "add clique arms at tau = 10, 15, 20, 25, 30");
  compare->add_flag("--ablate-ms-mining", ablate_mining, "add a clique arm without MS pair mining");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto prepare = [&](const Common& c, const Binder& b) {
    cfg = load_config(c);
    b.apply();
    cfg.threads = thread_count(c.threads);
    return cfg.threads;
  };

  try {
    if (synth->parsed()) {
      prepare(synth_c, synth_b);
      cfg.world.seed = require_seed(synth_c);
      return run_synth(cfg, synth_kind, synth_out);
    }
    if (mine->parsed()) {
      const std::size_t threads = prepare(mine_c, mine_b);
      cfg.mining.seed = require_seed(mine_c);
      return run_mine(cfg, mine_dataset, mine_sparse, mine_random, mine_out, threads);
    }
    if (train->parsed()) {
      const std::size_t threads = prepare(train_c, train_b);
      cfg.train.seed = require_seed(train_c);
      return run_train(cfg, train_dataset, train_sparse, train_batches, train_out, threads);
    }
    if (eval->parsed()) {
      const std::size_t threads = prepare(eval_in.common, eval_b);
      return run_recall(cfg, eval_in.database, eval_in.queries, eval_in.embedder, eval_in.out, false, threads);
    }
    if (curve->parsed()) {
      const std::size_t threads = prepare(curve_in.common, curve_b);
      return run_recall(cfg, curve_in.database, curve_in.queries, curve_in.embedder, curve_in.out, true, threads);
    }
    if (gds->parsed()) {
      prepare(gds_in.common, gds_b);
      return run_gds(cfg, require_seed(gds_in.common), gds_in.database, gds_in.queries, gds_in.embedder, gds_in.out);
    }
    if (compare->parsed()) {
      prepare(compare_c, compare_b);
      cfg.seed = require_seed(compare_c);
      return run_compare(cfg, tau_sweep, ablate_mining);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
