#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cliquemining/dataset.hpp"

namespace cliquemining {

/// Parameters of a synthetic geotagged-sequence world.
///
/// Each city holds `paths_per_city` random-walk routes inside a square of side
/// `city_extent`; sequences traverse routes round-robin, cycling through the
/// capture conditions. A frame's raw feature is a smooth random field of its
/// position (random Fourier features, half at `spatial_length_scale`, half at
/// `fine_length_scale`), plus a per-condition offset, plus i.i.d. noise.
struct SynthConfig {
  std::size_t num_cities = 4;
  std::size_t sequences_per_city = 16;
  std::size_t paths_per_city = 0;  // 0: sequences_per_city / num_conditions
  double path_length = 600.0;
  double frame_spacing = 5.0;
  std::size_t raw_dim = 128;
  double spatial_length_scale = 300.0;
  double fine_length_scale = 37.5;  // 0 disables the fine band
  double appearance_noise_sigma = 0.11;
  std::size_t num_conditions = 2;
  double condition_offset_sigma = 0.03;
  double city_extent = 600.0;
  std::size_t first_city = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> field_seed;  // appearance field; defaults to seed
  bool normalize = true;

  void validate() const;
  [[nodiscard]] std::size_t effective_paths_per_city() const;
  [[nodiscard]] std::size_t frames_per_sequence() const;
  [[nodiscard]] std::uint64_t appearance_seed() const { return field_seed.value_or(seed); }
};

using Polyline = std::vector<Position>;

/// Appearance model shared by every dataset generated with the same field seed.
class AppearanceField {
 public:
  explicit AppearanceField(const SynthConfig& cfg);

  /// Noise-free raw feature at a position under a condition.
  [[nodiscard]] Eigen::VectorXd clean(const Position& p, std::size_t condition) const;
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(phases_.size()); }

 private:
  Eigen::Matrix<double, Eigen::Dynamic, 2> frequencies_;
  Eigen::VectorXd phases_;
  Eigen::MatrixXd condition_offsets_;  // raw_dim x num_conditions
};

/// Generator output with the construction details tests need.
struct SynthWorld {
  Dataset dataset;
  std::vector<Polyline> routes;               // indexed city-major
  std::vector<std::size_t> sequence_route;    // per dataset sequence
  std::vector<double> sequence_start_arc;     // arc length of seq_index 0
  std::vector<std::size_t> frame_condition;   // per frame
  Eigen::MatrixXd raw;                        // un-normalized raw features
};

struct BenchmarkPair {
  Dataset database;  // condition 0 traversals
  Dataset queries;   // remaining conditions
};

/// City origin in UTM meters; cities are at least 10 km apart.
Position city_origin(std::size_t city_index, double city_extent);
std::string city_name(std::size_t city_index);

/// Point at arc length s along the polyline (clamped to its ends).
Position point_at_arc(const Polyline& poly, double s);
double polyline_length(const Polyline& poly);

SynthWorld generate_world_detailed(const SynthConfig& cfg);
Dataset generate_world(const SynthConfig& cfg);
BenchmarkPair make_dense_benchmark(const SynthConfig& cfg);

/// Sparse source of isolated places: each sequence is one place group of
/// `group_size` frames scattered within `group_radius` meters of a random
/// centre, each under a random condition.
struct SparseConfig {
  std::size_t num_groups = 2000;
  std::size_t group_size = 4;
  double group_radius = 4.0;
};
Dataset make_sparse_source(const SynthConfig& cfg, const SparseConfig& sparse);

/// Dataset made of the given frames (re-indexed, original order kept).
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& frame_ids, const std::string& name);

}  // namespace cliquemining
