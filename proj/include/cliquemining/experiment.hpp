#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cliquemining/config_json.hpp"
#include "cliquemining/embedder.hpp"
#include "cliquemining/mining.hpp"
#include "cliquemining/ms_loss.hpp"
#include "cliquemining/retrieval.hpp"
#include "cliquemining/synth.hpp"

namespace cliquemining {

struct EvalConfig {
  double threshold = 25.0;
  std::vector<std::size_t> ks{1, 5, 10};
  ThresholdMode mode = ThresholdMode::meters;
  std::vector<double> gds_edges = default_gds_edges();
  std::size_t gds_pair_budget = 0;  // 0: every query-database pair
  double slope_range = 50.0;        // GDS mean slope over (0, slope_range]
  double std_range = 25.0;          // mean per-bin std over (0, std_range]
  std::size_t ordering_trials = 100000;
  std::vector<double> curve_thresholds{5, 10, 15, 20, 25, 30, 40, 50, 75, 100};
};

/// Everything one experiment needs. The training world, the held-out
/// benchmark cities and the sparse source share one appearance field.
struct ExperimentConfig {
  SynthConfig world;
  std::size_t benchmark_cities = 1;
  SparseConfig sparse;
  MiningConfig mining;
  MsParams ms;
  TrainConfig train;
  EvalConfig eval;
  std::size_t num_seeds = 5;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t threads = 1;

  void validate() const;
};

ExperimentConfig default_experiment_config();

template <typename J>
void to_json(J& j, const EvalConfig& c) {
  j = J{{"threshold", c.threshold},
        {"ks", c.ks},
        {"mode", to_string(c.mode)},
        {"gds_edges", c.gds_edges},
        {"gds_pair_budget", c.gds_pair_budget},
        {"slope_range", c.slope_range},
        {"std_range", c.std_range},
        {"ordering_trials", c.ordering_trials},
        {"curve_thresholds", c.curve_thresholds}};
}

template <typename J>
void from_json(const J& j, EvalConfig& c) {
  detail::reject_unknown(j, "eval",
                         {"threshold", "ks", "mode", "gds_edges", "gds_pair_budget", "slope_range", "std_range",
                          "ordering_trials", "curve_thresholds"});
  detail::read(j, "threshold", c.threshold);
  detail::read(j, "ks", c.ks);
  if (j.contains("mode")) c.mode = parse_threshold_mode(j.at("mode").template get<std::string>());
  detail::read(j, "gds_edges", c.gds_edges);
  detail::read(j, "gds_pair_budget", c.gds_pair_budget);
  detail::read(j, "slope_range", c.slope_range);
  detail::read(j, "std_range", c.std_range);
  detail::read(j, "ordering_trials", c.ordering_trials);
  detail::read(j, "curve_thresholds", c.curve_thresholds);
}

template <typename J>
void to_json(J& j, const ExperimentConfig& c) {
  j = J{{"seed", c.seed},
        {"num_seeds", c.num_seeds},
        {"output_dir", c.output_dir},
        {"threads", c.threads},
        {"benchmark_cities", c.benchmark_cities}};
  j["synth"] = c.world;
  j["sparse"] = c.sparse;
  j["mining"] = c.mining;
  j["ms"] = c.ms;
  j["train"] = c.train;
  j["eval"] = c.eval;
}

template <typename J>
void from_json(const J& j, ExperimentConfig& c) {
  detail::reject_unknown(j, "top level",
                         {"seed", "num_seeds", "output_dir", "threads", "benchmark_cities", "synth", "sparse",
                          "mining", "ms", "train", "eval"});
  detail::read(j, "seed", c.seed);
  detail::read(j, "num_seeds", c.num_seeds);
  detail::read(j, "output_dir", c.output_dir);
  detail::read(j, "threads", c.threads);
  detail::read(j, "benchmark_cities", c.benchmark_cities);
  if (j.contains("synth")) from_json(j.at("synth"), c.world);
  if (j.contains("sparse")) from_json(j.at("sparse"), c.sparse);
  if (j.contains("mining")) from_json(j.at("mining"), c.mining);
  if (j.contains("ms")) from_json(j.at("ms"), c.ms);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("eval")) from_json(j.at("eval"), c.eval);
}

std::string experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Datasets for one seed of an experiment.
struct SeedData {
  std::uint64_t seed = 0;
  SynthConfig world_cfg;
  SynthConfig benchmark_cfg;
  Dataset world;
  Dataset sparse;
  BenchmarkPair benchmark;
};

std::uint64_t seed_for(std::uint64_t master, std::size_t seed_index);
SeedData prepare_seed(const ExperimentConfig& cfg, std::size_t seed_index);

/// One training arm: clique-mined batches mixed with sparse places, or
/// batches drawn from the sparse source only. Optional overrides support the
/// ablation axes.
enum class ArmKind { clique, random };
struct ArmSpec {
  std::string name;
  ArmKind kind = ArmKind::clique;
  std::optional<double> tau;
  std::optional<bool> ms_mining;
  std::optional<SamplingMode> sampling_mode;
  std::optional<std::size_t> epochs;
};

struct ArmMetrics {
  std::string arm;
  std::size_t seed_index = 0;
  double recall1 = 0.0;
  double recall5 = 0.0;
  double recall10 = 0.0;
  double gds_slope = 0.0;
  double gds_std = 0.0;
  double ordering = 0.0;
  double first_loss = 0.0;
  double final_loss = 0.0;
};

struct Evaluation {
  RecallReport recall;
  RecallReport curve;
  GdsProfile gds;
  OrderingEstimate ordering;
};

Evaluation evaluate_embedder(const ToyEmbedder& e, const BenchmarkPair& bench, const EvalConfig& eval,
                             std::uint64_t seed, std::size_t threads = 1);

std::vector<BatchManifest> arm_batches(const ExperimentConfig& cfg, const ArmSpec& arm, const SeedData& data,
                                       const Dataset& mining_view);

ArmMetrics run_arm(const ExperimentConfig& cfg, const ArmSpec& arm, const SeedData& data, std::size_t seed_index,
                   Evaluation* eval_out = nullptr);

struct ComparisonSummary {
  std::vector<ArmMetrics> rows;  // arm-major per seed, in the order run
  std::vector<std::string> arms;

  [[nodiscard]] std::vector<double> column(const std::string& arm, double ArmMetrics::*field) const;
  [[nodiscard]] double median(const std::string& arm, double ArmMetrics::*field) const;
  /// Median over seeds of (a - b) for seeds present in both arms.
  [[nodiscard]] double median_delta(const std::string& a, const std::string& b, double ArmMetrics::*field) const;
};

double median_of(std::vector<double> v);

ComparisonSummary run_comparison(const ExperimentConfig& cfg, const std::vector<ArmSpec>& arms);

std::string comparison_csv(const ComparisonSummary& s);
/// Per-arm medians, then median deltas of every arm against the first one.
std::string comparison_summary_csv(const ComparisonSummary& s);

}  // namespace cliquemining
