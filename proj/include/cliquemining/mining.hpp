#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cliquemining/dataset.hpp"
#include "cliquemining/graph.hpp"
#include "cliquemining/rng.hpp"

namespace cliquemining {

enum class SamplingMode { weighted, most_similar, uniform };

std::string to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(const std::string& text);

struct MiningConfig {
  std::size_t S = 15;        // sequences drawn besides the reference
  double tau = 25.0;         // edge threshold, meters
  std::size_t N = 60;        // places per batch
  std::size_t K = 4;         // images per place
  double clique_fraction = 0.5;
  std::size_t num_batches = 4000;
  SamplingMode sampling_mode = SamplingMode::weighted;
  double similarity_temperature = 0.1;
  std::size_t max_graph_restarts = 32;
  std::uint64_t seed = 0;

  void validate() const;
  [[nodiscard]] std::size_t clique_places() const;
};

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Provenance { clique, sparse };

struct Place {
  std::size_t label = 0;
  Provenance provenance = Provenance::clique;
  std::vector<std::size_t> frame_ids;  // into the dense dataset (clique) or the sparse source (sparse)
};

struct BatchManifest {
  std::vector<Place> places;

  [[nodiscard]] std::size_t image_count() const;
};

/// Cosine similarity of the central-frame embeddings of two sequences.
double sequence_similarity(const Dataset& ds, const std::string& a, const std::string& b);
double sequence_similarity(const Dataset& ds, std::size_t a, std::size_t b);

/// Reference sequence plus up to S companions from the same city. Indices into
/// ds.sequences(); the reference comes first.
std::vector<std::size_t> select_sequences(const Dataset& ds, const MiningConfig& cfg, Rng& rng);

/// Companion choice for a fixed reference; exposed for the sampling-mode tests.
std::vector<std::size_t> select_companions(const Dataset& ds, std::size_t reference,
                                           const std::vector<std::size_t>& pool, const MiningConfig& cfg, Rng& rng);

CandidateGraph build_candidate_graph(const Dataset& ds, const MiningConfig& cfg, Rng& rng);

/// Random K-clique: vertices are ranked by a random permutation, the first
/// maximal clique of size >= K found is kept and K of its vertices are drawn
/// uniformly. Returns local vertex ids (sorted) or nullopt.
std::optional<std::vector<std::size_t>> sample_clique(const Graph& g, std::size_t k, Rng& rng);
std::optional<Place> sample_place(const CandidateGraph& g, std::size_t k, Rng& rng);

/// Distinct groups of the sparse source, K frames each, labelled 0.
std::vector<Place> mix_sparse_places(const Dataset& sparse, std::size_t count, std::size_t k, Rng& rng);

BatchManifest sample_batch(const Dataset& ds, const Dataset* sparse, const MiningConfig& cfg, Rng& rng);

/// Batch of N places taken from the sparse source only (the random-place
/// baseline).
BatchManifest sample_random_place_batch(const Dataset& sparse, const MiningConfig& cfg, Rng& rng);

/// num_batches manifests; batch b uses a generator seeded from (seed, b), so
/// the result does not depend on the thread count.
std::vector<BatchManifest> compile_batch_collection(const Dataset& ds, const Dataset* sparse, const MiningConfig& cfg,
                                                    std::size_t threads = 1);
std::vector<BatchManifest> compile_random_collection(const Dataset& sparse, const MiningConfig& cfg,
                                                     std::size_t threads = 1);

/// Violations of the manifest invariants (unique labels, clique places are
/// K-cliques under tau, clique places pairwise >= tau apart).
std::vector<std::string> check_manifest(const BatchManifest& batch, const Dataset& ds, const MiningConfig& cfg);

struct BatchCollection {
  MiningConfig config;
  std::string dataset_fingerprint;
  std::string sparse_fingerprint;
  std::vector<BatchManifest> batches;
};

void save_batch_collection(const BatchCollection& collection, const std::filesystem::path& path);
BatchCollection load_batch_collection(const std::filesystem::path& path);

}  // namespace cliquemining
