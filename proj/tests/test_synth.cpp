#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "cliquemining/retrieval.hpp"
#include "cliquemining/synth.hpp"
#include "oracles.hpp"

using namespace cliquemining;

namespace {

SynthConfig small() {
  SynthConfig c;
  c.num_cities = 2;
  c.sequences_per_city = 4;
  c.path_length = 100.0;
  c.frame_spacing = 5.0;
  c.raw_dim = 32;
  c.seed = 17;
  return c;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> id(v.size());
  std::iota(id.begin(), id.end(), 0);
  std::sort(id.begin(), id.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < id.size(); ++i) r[id[i]] = static_cast<double>(i);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(ra.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double s = 0, sa = 0, sb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    s += (ra[i] - ma) * (rb[i] - mb);
    sa += (ra[i] - ma) * (ra[i] - ma);
    sb += (rb[i] - mb) * (rb[i] - mb);
  }
  return s / std::sqrt(sa * sb);
}

}  // namespace

TEST_CASE("frames per sequence is floor(path/spacing)+1") {
  SynthConfig c = small();
  CHECK(c.frames_per_sequence() == 21);
  const Dataset ds = generate_world(c);
  CHECK(ds.size() == 2 * 4 * 21);
  for (const Sequence& s : ds.sequences()) CHECK(s.frame_ids.size() == 21);
  CHECK(validate(ds).empty());
}

TEST_CASE("generation is deterministic and seed sensitive") {
  const Dataset a = generate_world(small());
  const Dataset b = generate_world(small());
  CHECK(fingerprint(a) == fingerprint(b));
  SynthConfig c = small();
  c.seed = 18;
  CHECK(fingerprint(generate_world(c)) != fingerprint(a));
}

TEST_CASE("invalid configs are rejected") {
  auto bad = [](auto edit) {
    SynthConfig c = small();
    edit(c);
    CHECK_THROWS_AS(generate_world(c), std::invalid_argument);
  };
  bad([](SynthConfig& c) { c.frame_spacing = 0.0; });
  bad([](SynthConfig& c) { c.path_length = 1.0; });
  bad([](SynthConfig& c) { c.appearance_noise_sigma = -1.0; });
  bad([](SynthConfig& c) { c.condition_offset_sigma = -0.1; });
  bad([](SynthConfig& c) { c.num_conditions = 0; });
  SynthConfig one = small();
  one.num_conditions = 1;
  CHECK_THROWS_AS(make_dense_benchmark(one), std::invalid_argument);
}

TEST_CASE("consecutive frames sit frame_spacing apart along the route") {
  const SynthWorld w = generate_world_detailed(small());
  const auto& seqs = w.dataset.sequences();
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    const Polyline& route = w.routes[w.sequence_route[s]];
    for (std::size_t i = 0; i < seqs[s].frame_ids.size(); ++i) {
      const double arc = w.sequence_start_arc[s] + 5.0 * static_cast<double>(i);
      CHECK(oracle::planar(w.dataset.frame(seqs[s].frame_ids[i]).position, point_at_arc(route, arc)) < 1e-9);
    }
    // chord never exceeds the arc
    for (std::size_t i = 1; i < seqs[s].frame_ids.size(); ++i) {
      const double chord = oracle::planar(w.dataset.frame(seqs[s].frame_ids[i - 1]).position,
                                          w.dataset.frame(seqs[s].frame_ids[i]).position);
      CHECK(chord <= 5.0 + 1e-9);
    }
  }
}

TEST_CASE("point_at_arc walks the polyline") {
  const Polyline p{Position(0, 0), Position(10, 0), Position(10, 10)};
  CHECK(polyline_length(p) == 20.0);
  CHECK(oracle::planar(point_at_arc(p, 5.0), Position(5, 0)) < 1e-12);
  CHECK(oracle::planar(point_at_arc(p, 15.0), Position(10, 5)) < 1e-12);
  CHECK(oracle::planar(point_at_arc(p, -3.0), Position(0, 0)) < 1e-12);
  CHECK(oracle::planar(point_at_arc(p, 99.0), Position(10, 10)) < 1e-12);
}

TEST_CASE("cities are far apart") {
  const Dataset ds = generate_world(small());
  double closest = 1e300;
  for (const Frame& a : ds.frames()) {
    for (const Frame& b : ds.frames()) {
      if (a.city != b.city) closest = std::min(closest, oracle::planar(a.position, b.position));
    }
  }
  CHECK(closest >= 10000.0);
}

TEST_CASE("noise-free single-scale field is monotone in distance at short range") {
  SynthConfig c;
  c.num_cities = 1;
  c.sequences_per_city = 4;
  c.num_conditions = 1;
  c.appearance_noise_sigma = 0.0;
  c.condition_offset_sigma = 0.0;
  c.fine_length_scale = 0.0;
  c.raw_dim = 1024;
  c.path_length = 300.0;
  c.seed = 5;
  const SynthWorld w = generate_world_detailed(c);
  std::vector<double> geo, raw;
  for (Eigen::Index i = 0; i < w.raw.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < w.raw.rows(); ++j) {
      const double g = oracle::planar(w.dataset.frame(static_cast<std::size_t>(i)).position,
                                      w.dataset.frame(static_cast<std::size_t>(j)).position);
      if (g < c.spatial_length_scale) {
        geo.push_back(g);
        raw.push_back(oracle::l2(w.raw, static_cast<std::size_t>(i), w.raw, static_cast<std::size_t>(j)));
      }
    }
  }
  REQUIRE(geo.size() > 1000);
  CHECK(spearman(geo, raw) > 0.99);
}

TEST_CASE("dense benchmark splits by condition") {
  SynthConfig c = small();
  c.num_conditions = 2;
  const BenchmarkPair b = make_dense_benchmark(c);
  // 4 sequences per city over 2 routes: each route has one db and one query traversal
  CHECK(b.database.sequences().size() == 4);
  CHECK(b.queries.sequences().size() == 4);
  CHECK(validate(b.database).empty());
  CHECK(validate(b.queries).empty());
  for (const Frame& q : b.queries.frames()) {
    double best = 1e300;
    for (const Frame& d : b.database.frames()) best = std::min(best, oracle::planar(q.position, d.position));
    CHECK(best <= c.frame_spacing);
  }
}

TEST_CASE("noise-free identity embedder retrieves perfectly") {
  SynthConfig c = small();
  c.appearance_noise_sigma = 0.0;
  c.condition_offset_sigma = 0.0;
  c.raw_dim = 256;
  const BenchmarkPair b = make_dense_benchmark(c);
  const auto res = knn_retrieve(b.queries.embeddings(), b.database.embeddings(), 1);
  const auto rep = recall_at_k(res, geo_info(b.queries), geo_info(b.database), 25.0, {1}, ThresholdMode::meters);
  CHECK(rep.recall(25.0, 1) == 1.0);
}

TEST_CASE("sparse source groups are tight and shared-field") {
  SynthConfig c = small();
  SparseConfig s;
  s.num_groups = 30;
  s.group_size = 4;
  s.group_radius = 4.0;
  const Dataset sp = make_sparse_source(c, s);
  CHECK(sp.size() == 120);
  CHECK(sp.sequences().size() == 30);
  CHECK(validate(sp).empty());
  for (const Sequence& seq : sp.sequences()) {
    for (std::size_t a : seq.frame_ids) {
      for (std::size_t b : seq.frame_ids) CHECK(oracle::planar(sp.frame(a).position, sp.frame(b).position) <= 8.0 + 1e-9);
    }
  }
  CHECK(fingerprint(make_sparse_source(c, s)) == fingerprint(sp));
}

TEST_CASE("subset keeps order and rows") {
  const Dataset ds = generate_world(small());
  const Dataset sub = subset(ds, {5, 2, 40}, "sub");
  REQUIRE(sub.size() == 3);
  CHECK(sub.frame(0).position == ds.frame(5).position);
  CHECK(sub.frame(2).frame_id == 2);
  CHECK(sub.embeddings().values.row(1) == ds.embeddings().values.row(2));
}
