#include "cliquemining/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "cliquemining/rng.hpp"

namespace cliquemining {

namespace {

constexpr std::uint64_t kStreamExperiment = 0x6578706572ULL;
constexpr std::uint64_t kStreamBenchmark = 0x62656e6368ULL;
constexpr std::uint64_t kStreamSparseWorld = 0x7370777264ULL;
constexpr std::uint64_t kStreamRecompute = 0x7265636f6dULL;

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  mining.validate();
  ms.validate();
  train.validate();
  if (benchmark_cities == 0) throw std::invalid_argument("experiment: benchmark_cities must be >= 1");
  if (num_seeds == 0) throw std::invalid_argument("experiment: num_seeds must be >= 1");
  if (eval.ks.empty()) throw std::invalid_argument("experiment: eval.ks must not be empty");
  if (!(eval.threshold >= 0.0)) throw std::invalid_argument("experiment: eval.threshold must be >= 0");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.mining.num_batches = 100;
  c.train.epochs = 10;
  c.train.learning_rate = 0.5;
  return c;
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j = cfg;
  return j.dump(2) + "\n";
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  ExperimentConfig c = default_experiment_config();
  const auto j = nlohmann::ordered_json::parse(text);
  from_json(j, c);
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return experiment_config_from_json(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::uint64_t seed_for(std::uint64_t master, std::size_t seed_index) {
  return derive_seed(master, kStreamExperiment, seed_index);
}

SeedData prepare_seed(const ExperimentConfig& cfg, std::size_t seed_index) {
  cfg.validate();
  SeedData d{};
  d.seed = seed_for(cfg.seed, seed_index);
  d.world_cfg = cfg.world;
  d.world_cfg.seed = d.seed;
  d.world_cfg.field_seed = d.seed;
  d.world = generate_world(d.world_cfg);

  SynthConfig sparse_cfg = d.world_cfg;
  sparse_cfg.seed = derive_seed(d.seed, kStreamSparseWorld);
  d.sparse = make_sparse_source(sparse_cfg, cfg.sparse);

  d.benchmark_cfg = d.world_cfg;
  d.benchmark_cfg.seed = derive_seed(d.seed, kStreamBenchmark);
  d.benchmark_cfg.num_cities = cfg.benchmark_cities;
  d.benchmark_cfg.first_city = cfg.world.first_city + cfg.world.num_cities;
  d.benchmark = make_dense_benchmark(d.benchmark_cfg);
  return d;
}

Evaluation evaluate_embedder(const ToyEmbedder& e, const BenchmarkPair& bench, const EvalConfig& eval,
                             std::uint64_t seed, std::size_t threads) {
  const EmbeddingMatrix q = embed(e, bench.queries.embeddings());
  const EmbeddingMatrix db = embed(e, bench.database.embeddings());
  const GeoInfo qg = geo_info(bench.queries);
  const GeoInfo dg = geo_info(bench.database);
  std::size_t kmax = *std::max_element(eval.ks.begin(), eval.ks.end());
  const RetrievalResult res = knn_retrieve(q, db, kmax, threads);

  Evaluation out;
  out.recall = recall_at_k(res, qg, dg, eval.threshold, eval.ks, eval.mode);
  out.curve = recall_vs_threshold_curve(res, qg, dg, eval.curve_thresholds, eval.ks, eval.mode);
  const Eigen::MatrixXd qd = as_double(q);
  const Eigen::MatrixXd dd = as_double(db);
  const std::size_t budget = eval.gds_pair_budget == 0 ? qg.size() * dg.size() : eval.gds_pair_budget;
  out.gds = gds_profile(qd, qg.positions, dd, dg.positions, eval.gds_edges, std::max<std::size_t>(budget, 1), seed);
  if (eval.ordering_trials > 0 && dg.size() >= 3) {
    out.ordering = ordering_probability(dd, dg.positions, eval.ordering_trials, seed);
  }
  return out;
}

std::vector<BatchManifest> arm_batches(const ExperimentConfig& cfg, const ArmSpec& arm, const SeedData& data,
                                       const Dataset& mining_view) {
  MiningConfig m = cfg.mining;
  m.seed = data.seed;
  if (arm.tau) m.tau = *arm.tau;
  if (arm.sampling_mode) m.sampling_mode = *arm.sampling_mode;
  if (arm.kind == ArmKind::random) return compile_random_collection(data.sparse, m, cfg.threads);
  return compile_batch_collection(mining_view, &data.sparse, m, cfg.threads);
}

ArmMetrics run_arm(const ExperimentConfig& cfg, const ArmSpec& arm, const SeedData& data, std::size_t seed_index,
                   Evaluation* eval_out) {
  MsParams ms = cfg.ms;
  if (arm.ms_mining) ms.mining = *arm.ms_mining;
  TrainConfig tc = cfg.train;
  tc.seed = data.seed;
  if (arm.epochs) tc.epochs = *arm.epochs;

  const std::vector<BatchManifest> batches = arm_batches(cfg, arm, data, data.world);
  const Eigen::MatrixXd dense = as_double(data.world.embeddings());
  const Eigen::MatrixXd sparse = as_double(data.sparse.embeddings());

  BatchRecompute recompute;
  if (arm.kind == ArmKind::clique) {
    recompute = [&](std::size_t epoch, const ToyEmbedder& e) {
      const Dataset view(data.world.frames(), embed(e, dense), data.world.metadata());
      SeedData reseeded = data;
      reseeded.seed = derive_seed(data.seed, kStreamRecompute, epoch);
      return arm_batches(cfg, arm, reseeded, view);
    };
  }
  const TrainResult trained = train_toy_embedder(RawSources{&dense, &sparse}, batches, ms, tc, recompute);
  const Evaluation ev = evaluate_embedder(trained.embedder, data.benchmark, cfg.eval, data.seed, cfg.threads);

  ArmMetrics m;
  m.arm = arm.name;
  m.seed_index = seed_index;
  auto recall_or_nan = [&](std::size_t k) {
    return std::find(cfg.eval.ks.begin(), cfg.eval.ks.end(), k) != cfg.eval.ks.end()
               ? ev.recall.recall(cfg.eval.threshold, k)
               : std::numeric_limits<double>::quiet_NaN();
  };
  m.recall1 = recall_or_nan(1);
  m.recall5 = recall_or_nan(5);
  m.recall10 = recall_or_nan(10);
  m.gds_slope = ev.gds.mean_slope(0.0, cfg.eval.slope_range);
  m.gds_std = ev.gds.mean_std(0.0, cfg.eval.std_range);
  m.ordering = ev.ordering.estimate;
  if (!trained.trace.empty()) {
    m.first_loss = trained.trace.front().loss;
    m.final_loss = trained.trace.back().loss;
  }
  if (eval_out != nullptr) *eval_out = ev;
  return m;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ComparisonSummary::column(const std::string& arm, double ArmMetrics::*field) const {
  std::vector<double> out;
  for (const ArmMetrics& r : rows) {
    if (r.arm == arm) out.push_back(r.*field);
  }
  return out;
}

double ComparisonSummary::median(const std::string& arm, double ArmMetrics::*field) const {
  return median_of(column(arm, field));
}

double ComparisonSummary::median_delta(const std::string& a, const std::string& b, double ArmMetrics::*field) const {
  std::vector<double> deltas;
  for (const ArmMetrics& ra : rows) {
    if (ra.arm != a) continue;
    for (const ArmMetrics& rb : rows) {
      if (rb.arm == b && rb.seed_index == ra.seed_index) deltas.push_back(ra.*field - rb.*field);
    }
  }
  return median_of(std::move(deltas));
}

ComparisonSummary run_comparison(const ExperimentConfig& cfg, const std::vector<ArmSpec>& arms) {
  cfg.validate();
  ComparisonSummary s;
  for (const ArmSpec& a : arms) s.arms.push_back(a.name);
  for (std::size_t i = 0; i < cfg.num_seeds; ++i) {
    const SeedData data = prepare_seed(cfg, i);
    for (const ArmSpec& a : arms) s.rows.push_back(run_arm(cfg, a, data, i));
  }
  return s;
}

namespace {

struct Column {
  const char* name;
  double ArmMetrics::*field;
};
constexpr Column kColumns[] = {{"recall@1", &ArmMetrics::recall1},     {"recall@5", &ArmMetrics::recall5},
                               {"recall@10", &ArmMetrics::recall10},   {"gds_slope", &ArmMetrics::gds_slope},
                               {"gds_std", &ArmMetrics::gds_std},      {"ordering", &ArmMetrics::ordering},
                               {"first_loss", &ArmMetrics::first_loss}, {"final_loss", &ArmMetrics::final_loss}};

std::string header(const char* lead) {
  std::string h = lead;
  for (const Column& c : kColumns) h += fmt::format(",{}", c.name);
  return h + "\n";
}

}  // namespace

std::string comparison_csv(const ComparisonSummary& s) {
  std::string out = header("arm,seed");
  for (const ArmMetrics& r : s.rows) {
    out += fmt::format("{},{}", r.arm, r.seed_index);
    for (const Column& c : kColumns) out += fmt::format(",{}", r.*c.field);
    out += "\n";
  }
  return out;
}

std::string comparison_summary_csv(const ComparisonSummary& s) {
  std::string out = header("statistic,arm");
  for (const std::string& arm : s.arms) {
    out += fmt::format("median,{}", arm);
    for (const Column& c : kColumns) out += fmt::format(",{}", s.median(arm, c.field));
    out += "\n";
  }
  for (std::size_t i = 1; i < s.arms.size(); ++i) {
    out += fmt::format("median_delta_vs_{},{}", s.arms.front(), s.arms[i]);
    for (const Column& c : kColumns) out += fmt::format(",{}", s.median_delta(s.arms[i], s.arms.front(), c.field));
    out += "\n";
  }
  return out;
}

}  // namespace cliquemining
