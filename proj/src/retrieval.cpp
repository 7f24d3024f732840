#include "cliquemining/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <fmt/core.h>

#include "cliquemining/rng.hpp"

namespace cliquemining {

RetrievalResult knn_retrieve(const EmbeddingMatrix& queries, const EmbeddingMatrix& database, std::size_t k,
                             std::size_t threads) {
  if (database.rows() == 0) throw std::invalid_argument("knn_retrieve: empty database");
  if (k == 0) throw std::invalid_argument("knn_retrieve: k must be >= 1");
  if (queries.rows() > 0 && queries.dim() != database.dim()) {
    throw std::invalid_argument(fmt::format("knn_retrieve: query dim {} vs database dim {}", queries.dim(),
                                            database.dim()));
  }
  const std::size_t nq = queries.rows();
  const std::size_t nd = database.rows();
  const std::size_t keep = std::min(k, nd);
  RetrievalResult res;
  res.indices.resize(nq);
  res.distances.resize(nq);

  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::size_t>> scored(nd);
    for (std::size_t q = begin; q < end; ++q) {
      const auto qrow = queries.values.row(static_cast<Eigen::Index>(q));
      for (std::size_t d = 0; d < nd; ++d) {
        scored[d] = {desc_distance(qrow, database.values.row(static_cast<Eigen::Index>(d))), d};
      }
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end());
      auto& idx = res.indices[q];
      auto& dist = res.distances[q];
      idx.resize(keep);
      dist.resize(keep);
      for (std::size_t r = 0; r < keep; ++r) {
        dist[r] = scored[r].first;
        idx[r] = scored[r].second;
      }
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(nq, 1));
  if (threads == 1) {
    run(0, nq);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (nq + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(nq, t * chunk);
      const std::size_t end = std::min(nq, begin + chunk);
      pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return res;
}

GeoInfo geo_info(const Dataset& ds) {
  GeoInfo g;
  for (const Frame& f : ds.frames()) {
    g.positions.push_back(f.position);
    g.routes.push_back(route_of(f.seq_id));
    g.seq_index.push_back(f.seq_index);
  }
  return g;
}

std::string to_string(ThresholdMode mode) { return mode == ThresholdMode::meters ? "meters" : "frames"; }

ThresholdMode parse_threshold_mode(const std::string& text) {
  if (text == "meters") return ThresholdMode::meters;
  if (text == "frames") return ThresholdMode::frames;
  throw std::invalid_argument("unknown threshold mode '" + text + "'");
}

bool is_correct(const GeoInfo& q, std::size_t qi, const GeoInfo& db, std::size_t di, double threshold,
                ThresholdMode mode) {
  if (mode == ThresholdMode::meters) return geo_distance(q.positions[qi], db.positions[di]) <= threshold;
  if (q.routes[qi] != db.routes[di]) return false;
  const double offset = std::abs(static_cast<double>(q.seq_index[qi]) - static_cast<double>(db.seq_index[di]));
  return offset <= threshold;
}

double RecallReport::recall(double threshold, std::size_t k) const {
  for (const RecallRow& r : rows) {
    if (r.threshold == threshold && r.k == k) return r.recall;
  }
  throw std::out_of_range(fmt::format("no recall entry for threshold {} and k {}", threshold, k));
}

namespace {

void check_alignment(const RetrievalResult& res, const GeoInfo& queries, const GeoInfo& database,
                     ThresholdMode mode) {
  if (res.num_queries() != queries.size()) {
    throw std::invalid_argument(fmt::format("recall: {} retrieval rows but {} query positions", res.num_queries(),
                                            queries.size()));
  }
  for (const auto& idx : res.indices) {
    for (std::size_t d : idx) {
      if (d >= database.size()) {
        throw std::invalid_argument(fmt::format("recall: database index {} beyond {} positions", d, database.size()));
      }
    }
  }
  if (mode == ThresholdMode::frames) {
    if (queries.routes.size() != queries.size() || queries.seq_index.size() != queries.size() ||
        database.routes.size() != database.size() || database.seq_index.size() != database.size()) {
      throw std::invalid_argument("recall: frames mode needs route and sequence index for every frame");
    }
  }
}

}  // namespace

RecallReport recall_vs_threshold_curve(const RetrievalResult& res, const GeoInfo& queries, const GeoInfo& database,
                                       const std::vector<double>& thresholds, const std::vector<std::size_t>& ks,
                                       ThresholdMode mode) {
  check_alignment(res, queries, database, mode);
  if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
    throw std::invalid_argument("recall curve: thresholds must be ascending");
  }
  for (std::size_t k : ks) {
    if (k == 0) throw std::invalid_argument("recall: k must be >= 1");
  }
  RecallReport report;
  report.mode = mode;
  const std::size_t nq = res.num_queries();
  for (double t : thresholds) {
    // Rank of the first correct retrieval per query (or none).
    std::vector<std::size_t> first_hit(nq, std::numeric_limits<std::size_t>::max());
    for (std::size_t q = 0; q < nq; ++q) {
      const auto& idx = res.indices[q];
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (is_correct(queries, q, database, idx[r], t, mode)) {
          first_hit[q] = r;
          break;
        }
      }
    }
    for (std::size_t k : ks) {
      const auto hits =
          static_cast<std::size_t>(std::count_if(first_hit.begin(), first_hit.end(), [k](std::size_t r) { return r < k; }));
      report.rows.push_back(
          RecallRow{t, k, nq == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(nq), nq});
    }
  }
  return report;
}

RecallReport recall_at_k(const RetrievalResult& res, const GeoInfo& queries, const GeoInfo& database,
                         double threshold, const std::vector<std::size_t>& ks, ThresholdMode mode) {
  return recall_vs_threshold_curve(res, queries, database, {threshold}, ks, mode);
}

std::size_t GdsProfile::total_count() const {
  std::size_t total = 0;
  for (const GdsBin& b : bins) total += b.count;
  return total;
}

double GdsProfile::mean_slope(double lo, double hi) const {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (const GdsBin& b : bins) {
    if (b.count == 0 || !std::isfinite(b.hi) || b.lo < lo || b.hi > hi) continue;
    const double x = 0.5 * (b.lo + b.hi);
    sx += x;
    sy += b.mean;
    sxx += x * x;
    sxy += x * b.mean;
    ++n;
  }
  if (n < 2) return 0.0;
  const double dn = static_cast<double>(n);
  const double denom = dn * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (dn * sxy - sx * sy) / denom;
}

double GdsProfile::mean_std(double lo, double hi) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const GdsBin& b : bins) {
    if (b.count == 0 || !std::isfinite(b.hi) || b.lo < lo || b.hi > hi) continue;
    total += b.std;
    ++n;
  }
  return n == 0 ? 0.0 : total / static_cast<double>(n);
}

std::vector<double> default_gds_edges() {
  std::vector<double> edges;
  for (int m = 0; m <= 100; m += 5) edges.push_back(m);
  return edges;
}

namespace {

void check_edges(const std::vector<double>& edges) {
  if (edges.size() < 2) throw std::invalid_argument("gds: need at least two bin edges");
  if (edges.front() != 0.0) throw std::invalid_argument("gds: first bin edge must be 0");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("gds: bin edges must be strictly ascending");
  }
}

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
};

GdsProfile finish(const std::vector<double>& edges, const std::vector<Welford>& acc) {
  GdsProfile p;
  for (std::size_t b = 0; b < acc.size(); ++b) {
    GdsBin bin;
    bin.lo = edges[std::min(b, edges.size() - 1)];
    bin.hi = b + 1 < edges.size() ? edges[b + 1] : std::numeric_limits<double>::infinity();
    bin.count = acc[b].n;
    bin.mean = acc[b].n > 0 ? acc[b].mean : 0.0;
    bin.std = acc[b].n > 0 ? std::sqrt(std::max(0.0, acc[b].m2 / static_cast<double>(acc[b].n))) : 0.0;
    p.bins.push_back(bin);
  }
  return p;
}

}  // namespace

std::size_t gds_bin_index(const std::vector<double>& edges, double geo) {
  if (geo <= edges[1]) return 0;
  // First edge >= geo closes the bin on the right.
  const auto it = std::lower_bound(edges.begin() + 1, edges.end(), geo);
  if (it == edges.end()) return edges.size() - 1;
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

GdsProfile gds_profile(const Eigen::MatrixXd& queries, const std::vector<Position>& query_geo,
                       const Eigen::MatrixXd& database, const std::vector<Position>& db_geo,
                       const std::vector<double>& edges, std::size_t pair_budget, std::uint64_t seed) {
  check_edges(edges);
  if (pair_budget == 0) throw std::invalid_argument("gds: pair_budget must be >= 1");
  if (static_cast<std::size_t>(queries.rows()) != query_geo.size() ||
      static_cast<std::size_t>(database.rows()) != db_geo.size()) {
    throw std::invalid_argument("gds: embeddings and positions are misaligned");
  }
  if (queries.cols() != database.cols()) throw std::invalid_argument("gds: embedding dimensions differ");
  std::vector<Welford> acc(edges.size());
  auto add = [&](std::size_t q, std::size_t d) {
    const double g = geo_distance(query_geo[q], db_geo[d]);
    acc[gds_bin_index(edges, g)].add(desc_distance(queries.row(static_cast<Eigen::Index>(q)),
                                                   database.row(static_cast<Eigen::Index>(d))));
  };
  const std::size_t nq = query_geo.size();
  const std::size_t nd = db_geo.size();
  if (nq == 0 || nd == 0) return finish(edges, acc);
  if (pair_budget >= nq * nd) {
    for (std::size_t q = 0; q < nq; ++q) {
      for (std::size_t d = 0; d < nd; ++d) add(q, d);
    }
  } else {
    Rng rng = make_rng(seed, kStreamTrial);
    std::uniform_int_distribution<std::size_t> pq(0, nq - 1), pd(0, nd - 1);
    for (std::size_t t = 0; t < pair_budget; ++t) {
      const std::size_t q = pq(rng);
      add(q, pd(rng));
    }
  }
  return finish(edges, acc);
}

GdsProfile gds_profile(const Eigen::MatrixXd& embeddings, const std::vector<Position>& geo,
                       const std::vector<double>& edges, std::size_t pair_budget, std::uint64_t seed) {
  check_edges(edges);
  if (pair_budget == 0) throw std::invalid_argument("gds: pair_budget must be >= 1");
  if (static_cast<std::size_t>(embeddings.rows()) != geo.size()) {
    throw std::invalid_argument("gds: embeddings and positions are misaligned");
  }
  std::vector<Welford> acc(edges.size());
  auto add = [&](std::size_t i, std::size_t j) {
    acc[gds_bin_index(edges, geo_distance(geo[i], geo[j]))].add(
        desc_distance(embeddings.row(static_cast<Eigen::Index>(i)), embeddings.row(static_cast<Eigen::Index>(j))));
  };
  const std::size_t n = geo.size();
  if (n < 2) return finish(edges, acc);
  const std::size_t total = n * (n - 1) / 2;
  if (pair_budget >= total) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) add(i, j);
    }
  } else {
    Rng rng = make_rng(seed, kStreamTrial);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t t = 0; t < pair_budget; ++t) {
      std::size_t i = pick(rng), j = pick(rng);
      while (j == i) j = pick(rng);
      add(std::min(i, j), std::max(i, j));
    }
  }
  return finish(edges, acc);
}

OrderingEstimate ordering_probability(const Eigen::MatrixXd& embeddings, const std::vector<Position>& geo,
                                      std::size_t trials, std::uint64_t seed, bool reversed) {
  const std::size_t n = geo.size();
  if (static_cast<std::size_t>(embeddings.rows()) != n) {
    throw std::invalid_argument("ordering_probability: embeddings and positions are misaligned");
  }
  if (n < 3) throw std::invalid_argument("ordering_probability: need at least 3 frames");
  if (trials == 0) throw std::invalid_argument("ordering_probability: trial budget must be >= 1");
  const bool coincident =
      std::all_of(geo.begin(), geo.end(), [&](const Position& p) { return geo_distance(p, geo.front()) == 0.0; });
  if (coincident) throw std::invalid_argument("ordering_probability: all frames share one position");

  constexpr std::size_t kMaxRedraws = 10000;
  std::size_t hits = 0;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, kStreamTrial, t);
    std::size_t q = 0, i = 0, j = 0;
    double gi = 0.0, gj = 0.0;
    std::size_t draws = 0;
    do {
      if (++draws > kMaxRedraws) {
        throw std::invalid_argument("ordering_probability: no triples with distinct geographic distances found");
      }
      q = pick(rng);
      do i = pick(rng); while (i == q);
      do j = pick(rng); while (j == q || j == i);
      gi = geo_distance(geo[q], geo[i]);
      gj = geo_distance(geo[q], geo[j]);
    } while (gi == gj);
    if (gi > gj) std::swap(i, j);  // i is now the geographically nearer one
    const double ei = desc_distance(embeddings.row(static_cast<Eigen::Index>(q)),
                                    embeddings.row(static_cast<Eigen::Index>(i)));
    const double ej = desc_distance(embeddings.row(static_cast<Eigen::Index>(q)),
                                    embeddings.row(static_cast<Eigen::Index>(j)));
    const bool ordered = ei < ej;
    hits += (reversed ? !ordered : ordered) ? 1 : 0;
  }
  OrderingEstimate est;
  est.trials = trials;
  est.estimate = static_cast<double>(hits) / static_cast<double>(trials);
  est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
  return est;
}

}  // namespace cliquemining
