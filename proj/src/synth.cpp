#include "cliquemining/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

#include "cliquemining/rng.hpp"

namespace cliquemining {

namespace {

constexpr double kSegmentLength = 20.0;
constexpr double kMaxTurn = 0.5;  // radians per segment
constexpr double kCitySeparation = 20000.0;

Polyline random_route(Rng& rng, double length, double extent, const Position& origin) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> turn(-kMaxTurn, kMaxTurn);
  Polyline poly;
  Position cur = origin + Position(unit(rng) * extent, unit(rng) * extent);
  double heading = unit(rng) * 2.0 * std::numbers::pi;
  poly.push_back(cur);
  const Position lo = origin;
  const Position hi = origin + Position(extent, extent);
  double total = 0.0;
  while (total < length) {
    heading += turn(rng);
    Position next = cur + kSegmentLength * Position(std::cos(heading), std::sin(heading));
    for (int axis = 0; axis < 2; ++axis) {
      if (next[axis] < lo[axis] || next[axis] > hi[axis]) {
        heading = axis == 0 ? std::numbers::pi - heading : -heading;
        next = cur + kSegmentLength * Position(std::cos(heading), std::sin(heading));
      }
    }
    next = next.cwiseMax(lo).cwiseMin(hi);
    const double step = (next - cur).norm();
    if (step <= 0.0) continue;
    total += step;
    poly.push_back(next);
    cur = next;
  }
  return poly;
}

Dataset make_dataset(std::vector<Frame> frames, const Eigen::MatrixXd& raw, bool normalize, std::string name,
                     std::uint64_t seed) {
  EmbeddingMatrix emb;
  if (normalize) {
    emb = normalize_rows(raw);
  } else {
    emb.values = raw.cast<float>();
    emb.normalized = false;
  }
  return Dataset(std::move(frames), std::move(emb), DatasetMetadata{std::move(name), seed});
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid synth config: " + what); };
  if (num_cities == 0) fail("num_cities must be >= 1");
  if (sequences_per_city == 0) fail("sequences_per_city must be >= 1");
  if (!(frame_spacing > 0.0)) fail("frame_spacing must be > 0");
  if (!(path_length >= frame_spacing)) fail("path_length must be >= frame_spacing");
  if (raw_dim < 2) fail("raw_dim must be >= 2");
  if (!(spatial_length_scale > 0.0)) fail("spatial_length_scale must be > 0");
  if (!(fine_length_scale >= 0.0)) fail("fine_length_scale must be >= 0");
  if (!(appearance_noise_sigma >= 0.0)) fail("appearance_noise_sigma must be >= 0");
  if (!(condition_offset_sigma >= 0.0)) fail("condition_offset_sigma must be >= 0");
  if (num_conditions == 0) fail("num_conditions must be >= 1");
  if (!(city_extent > 0.0)) fail("city_extent must be > 0");
  if (effective_paths_per_city() == 0) fail("paths_per_city resolves to 0");
}

std::size_t SynthConfig::effective_paths_per_city() const {
  if (paths_per_city != 0) return paths_per_city;
  return std::max<std::size_t>(1, sequences_per_city / std::max<std::size_t>(1, num_conditions));
}

std::size_t SynthConfig::frames_per_sequence() const {
  return static_cast<std::size_t>(std::floor(path_length / frame_spacing + 1e-9)) + 1;
}

AppearanceField::AppearanceField(const SynthConfig& cfg) {
  Rng rng = make_rng(cfg.appearance_seed(), kStreamField);
  const auto m = static_cast<Eigen::Index>(cfg.raw_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  frequencies_.resize(m, 2);
  phases_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool fine = cfg.fine_length_scale > 0.0 && i >= m / 2;
    const double scale = fine ? cfg.fine_length_scale : cfg.spatial_length_scale;
    frequencies_(i, 0) = gauss(rng) / scale;
    frequencies_(i, 1) = gauss(rng) / scale;
    phases_(i) = phase(rng);
  }
  condition_offsets_.resize(m, static_cast<Eigen::Index>(cfg.num_conditions));
  for (Eigen::Index c = 0; c < condition_offsets_.cols(); ++c) {
    for (Eigen::Index i = 0; i < m; ++i) condition_offsets_(i, c) = cfg.condition_offset_sigma * gauss(rng);
  }
}

Eigen::VectorXd AppearanceField::clean(const Position& p, std::size_t condition) const {
  const double amp = std::sqrt(2.0 / static_cast<double>(phases_.size()));
  Eigen::VectorXd f = ((frequencies_ * p) + phases_).array().cos() * amp;
  return f + condition_offsets_.col(static_cast<Eigen::Index>(condition));
}

Position city_origin(std::size_t city_index, double city_extent) {
  return Position(400000.0 + static_cast<double>(city_index) * (city_extent + kCitySeparation), 4500000.0);
}

std::string city_name(std::size_t city_index) { return fmt::format("city{}", city_index); }

double polyline_length(const Polyline& poly) {
  double total = 0.0;
  for (std::size_t i = 1; i < poly.size(); ++i) total += (poly[i] - poly[i - 1]).norm();
  return total;
}

Position point_at_arc(const Polyline& poly, double s) {
  if (poly.empty()) throw std::invalid_argument("point_at_arc: empty polyline");
  if (s <= 0.0) return poly.front();
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const double seg = (poly[i] - poly[i - 1]).norm();
    if (s <= seg) return poly[i - 1] + (s / seg) * (poly[i] - poly[i - 1]);
    s -= seg;
  }
  return poly.back();
}

SynthWorld generate_world_detailed(const SynthConfig& cfg) {
  cfg.validate();
  const AppearanceField field(cfg);
  Rng layout = make_rng(cfg.seed, kStreamLayout);
  Rng noise_rng = make_rng(cfg.seed, kStreamNoise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t paths = cfg.effective_paths_per_city();
  const std::size_t per_seq = cfg.frames_per_sequence();
  const std::size_t total = cfg.num_cities * cfg.sequences_per_city * per_seq;

  SynthWorld world;
  world.raw.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(cfg.raw_dim));
  world.frame_condition.reserve(total);
  std::vector<Frame> frames;
  frames.reserve(total);

  for (std::size_t c = 0; c < cfg.num_cities; ++c) {
    const std::size_t city = cfg.first_city + c;
    const Position origin = city_origin(city, cfg.city_extent);
    const std::size_t first_route = world.routes.size();
    for (std::size_t r = 0; r < paths; ++r) {
      world.routes.push_back(random_route(layout, cfg.path_length + cfg.frame_spacing, cfg.city_extent, origin));
    }
    for (std::size_t s = 0; s < cfg.sequences_per_city; ++s) {
      const std::size_t route = s % paths;
      const std::size_t traversal = s / paths;
      const std::size_t condition = traversal % cfg.num_conditions;
      const double start = unit(layout) * cfg.frame_spacing;
      const Polyline& poly = world.routes[first_route + route];
      const std::string seq_id = fmt::format("c{}/r{}/t{}", city, route, traversal);
      world.sequence_route.push_back(first_route + route);
      world.sequence_start_arc.push_back(start);
      for (std::size_t i = 0; i < per_seq; ++i) {
        Frame f;
        f.frame_id = frames.size();
        f.seq_id = seq_id;
        f.city = city_name(city);
        f.position = point_at_arc(poly, start + static_cast<double>(i) * cfg.frame_spacing);
        f.seq_index = static_cast<std::uint32_t>(i);
        Eigen::VectorXd raw = field.clean(f.position, condition);
        for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) += cfg.appearance_noise_sigma * gauss(noise_rng);
        world.raw.row(static_cast<Eigen::Index>(f.frame_id)) = raw.transpose();
        world.frame_condition.push_back(condition);
        frames.push_back(std::move(f));
      }
    }
  }
  world.dataset = make_dataset(std::move(frames), world.raw, cfg.normalize, "synthetic-world", cfg.seed);
  return world;
}

Dataset generate_world(const SynthConfig& cfg) { return generate_world_detailed(cfg).dataset; }

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& frame_ids, const std::string& name) {
  std::vector<Frame> frames;
  frames.reserve(frame_ids.size());
  EmbeddingMatrix emb;
  emb.normalized = ds.embeddings().normalized;
  emb.values.resize(static_cast<Eigen::Index>(frame_ids.size()), static_cast<Eigen::Index>(ds.embeddings().dim()));
  for (std::size_t i = 0; i < frame_ids.size(); ++i) {
    Frame f = ds.frame(frame_ids[i]);
    f.frame_id = i;
    frames.push_back(std::move(f));
    emb.values.row(static_cast<Eigen::Index>(i)) = ds.embeddings().values.row(static_cast<Eigen::Index>(frame_ids[i]));
  }
  return Dataset(std::move(frames), std::move(emb), DatasetMetadata{name, ds.metadata().seed});
}

BenchmarkPair make_dense_benchmark(const SynthConfig& cfg) {
  if (cfg.num_conditions < 2) throw std::invalid_argument("invalid synth config: benchmark needs num_conditions >= 2");
  if (cfg.sequences_per_city < cfg.effective_paths_per_city() * cfg.num_conditions) {
    throw std::invalid_argument("invalid synth config: every route needs one traversal per condition");
  }
  const SynthWorld world = generate_world_detailed(cfg);
  std::vector<std::size_t> db, q;
  for (std::size_t i = 0; i < world.dataset.size(); ++i) {
    (world.frame_condition[i] == 0 ? db : q).push_back(i);
  }
  return BenchmarkPair{subset(world.dataset, db, "benchmark-database"), subset(world.dataset, q, "benchmark-queries")};
}

Dataset make_sparse_source(const SynthConfig& cfg, const SparseConfig& sparse) {
  cfg.validate();
  if (sparse.group_size == 0) throw std::invalid_argument("invalid sparse config: group_size must be >= 1");
  if (!(sparse.group_radius >= 0.0)) throw std::invalid_argument("invalid sparse config: group_radius must be >= 0");
  const AppearanceField field(cfg);
  Rng rng = make_rng(cfg.seed, kStreamSparse);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_city(0, cfg.num_cities - 1);
  std::uniform_int_distribution<std::size_t> pick_condition(0, cfg.num_conditions - 1);

  const std::size_t total = sparse.num_groups * sparse.group_size;
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(cfg.raw_dim));
  std::vector<Frame> frames;
  frames.reserve(total);
  for (std::size_t g = 0; g < sparse.num_groups; ++g) {
    const std::size_t city = cfg.first_city + pick_city(rng);
    const Position centre = city_origin(city, cfg.city_extent) +
                            Position(unit(rng) * cfg.city_extent, unit(rng) * cfg.city_extent);
    const std::string seq_id = fmt::format("c{}/g{}/t0", city, g);
    for (std::size_t i = 0; i < sparse.group_size; ++i) {
      const double radius = sparse.group_radius * std::sqrt(unit(rng));
      const double angle = unit(rng) * 2.0 * std::numbers::pi;
      Frame f;
      f.frame_id = frames.size();
      f.seq_id = seq_id;
      f.city = city_name(city);
      f.position = centre + radius * Position(std::cos(angle), std::sin(angle));
      f.seq_index = static_cast<std::uint32_t>(i);
      Eigen::VectorXd r = field.clean(f.position, pick_condition(rng));
      for (Eigen::Index k = 0; k < r.size(); ++k) r(k) += cfg.appearance_noise_sigma * gauss(rng);
      raw.row(static_cast<Eigen::Index>(f.frame_id)) = r.transpose();
      frames.push_back(std::move(f));
    }
  }
  return make_dataset(std::move(frames), raw, cfg.normalize, "synthetic-sparse", cfg.seed);
}

}  // namespace cliquemining
