#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliquemining/dataset.hpp"

namespace cliquemining {

/// Per query: top-k database indices by ascending L2 distance, ties broken by
/// ascending index.
struct RetrievalResult {
  std::vector<std::vector<std::size_t>> indices;
  std::vector<std::vector<double>> distances;

  [[nodiscard]] std::size_t num_queries() const { return indices.size(); }
};

RetrievalResult knn_retrieve(const EmbeddingMatrix& queries, const EmbeddingMatrix& database, std::size_t k,
                             std::size_t threads = 1);

/// Where each frame is: position, route key and index along the route.
struct GeoInfo {
  std::vector<Position> positions;
  std::vector<std::string> routes;
  std::vector<std::size_t> seq_index;

  [[nodiscard]] std::size_t size() const { return positions.size(); }
};
GeoInfo geo_info(const Dataset& ds);

enum class ThresholdMode { meters, frames };
std::string to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(const std::string& text);

/// Meters: d^g <= threshold. Frames: same route and |index offset| <= threshold.
bool is_correct(const GeoInfo& q, std::size_t qi, const GeoInfo& db, std::size_t di, double threshold,
                ThresholdMode mode);

struct RecallRow {
  double threshold = 0.0;
  std::size_t k = 0;
  double recall = 0.0;
  std::size_t num_queries = 0;
};

struct RecallReport {
  ThresholdMode mode = ThresholdMode::meters;
  std::vector<RecallRow> rows;  // threshold-major, then k in request order

  [[nodiscard]] double recall(double threshold, std::size_t k) const;
};

RecallReport recall_at_k(const RetrievalResult& res, const GeoInfo& queries, const GeoInfo& database,
                         double threshold, const std::vector<std::size_t>& ks, ThresholdMode mode);

/// recall_at_k for every threshold (ascending) in one table.
RecallReport recall_vs_threshold_curve(const RetrievalResult& res, const GeoInfo& queries, const GeoInfo& database,
                                       const std::vector<double>& thresholds, const std::vector<std::size_t>& ks,
                                       ThresholdMode mode);

/// Descriptor-distance statistics binned by geographic distance. Bin b covers
/// (edges[b], edges[b+1]], the first bin also includes edges[0], and the last
/// entry is the tail beyond the final edge. std is the population value.
struct GdsBin {
  double lo = 0.0;
  double hi = 0.0;  // +inf for the tail
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct GdsProfile {
  std::vector<GdsBin> bins;

  [[nodiscard]] std::size_t total_count() const;
  /// Least-squares slope of bin means against bin midpoints, over bins inside
  /// (lo, hi]. Empty bins are skipped.
  [[nodiscard]] double mean_slope(double lo, double hi) const;
  /// Average per-bin std over non-empty bins inside (lo, hi].
  [[nodiscard]] double mean_std(double lo, double hi) const;
};

/// 0, 5, ..., 100.
std::vector<double> default_gds_edges();

/// Index of the bin a geographic distance falls in (edges.size()-1 is the tail).
std::size_t gds_bin_index(const std::vector<double>& edges, double geo);

/// Query-database pairs. When pair_budget covers every pair all of them are
/// used once; otherwise pair_budget pairs are drawn uniformly with replacement
/// from a generator seeded by `seed`.
GdsProfile gds_profile(const Eigen::MatrixXd& queries, const std::vector<Position>& query_geo,
                       const Eigen::MatrixXd& database, const std::vector<Position>& db_geo,
                       const std::vector<double>& edges, std::size_t pair_budget, std::uint64_t seed);

/// Unordered pairs i < j within one set.
GdsProfile gds_profile(const Eigen::MatrixXd& embeddings, const std::vector<Position>& geo,
                       const std::vector<double>& edges, std::size_t pair_budget, std::uint64_t seed);

struct OrderingEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
};

/// Monte Carlo estimate of P(d^e_i < d^e_j | d^g_i < d^g_j) over triples
/// (q, i, j) of distinct frames; geographic ties are redrawn. Trial t uses its
/// own generator derived from (seed, t). With `reversed` the same triples
/// score d^e_far <= d^e_near instead, the exact complement.
OrderingEstimate ordering_probability(const Eigen::MatrixXd& embeddings, const std::vector<Position>& geo,
                                      std::size_t trials, std::uint64_t seed, bool reversed = false);

/// Double-precision copy of an embedding matrix.
inline Eigen::MatrixXd as_double(const EmbeddingMatrix& e) { return e.values.cast<double>(); }

}  // namespace cliquemining
