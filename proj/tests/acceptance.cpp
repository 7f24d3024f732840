// Acceptance checks. Usage: acceptance <criterion 1-9> [...]; no argument runs all.
// Prints one "criterion N: PASS|FAIL ..." line per criterion and exits non-zero
// if any failed.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "cli_runner.hpp"
#include "cliquemining/embedder.hpp"
#include "cliquemining/experiment.hpp"
#include "cliquemining/graph.hpp"
#include "cliquemining/mining.hpp"
#include "cliquemining/ms_loss.hpp"
#include "cliquemining/retrieval.hpp"
#include "cliquemining/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cliquemining;

namespace {

// Tolerances and budgets.
constexpr double kMiningSeconds = 60.0;
constexpr double kCliqueSeconds = 10.0;
constexpr double kSelectSeconds = 5.0;
constexpr double kGradSeconds = 30.0;
constexpr double kFdStep = 1e-6;
constexpr double kFdRelError = 1e-5;
constexpr double kKnnSeconds = 30.0;
constexpr double kNullLo = 0.47, kNullHi = 0.53;
constexpr std::size_t kNullTrials = 100000;
constexpr double kGdsTolerance = 1e-10;
constexpr double kRecallGain = 0.03;
constexpr double kBaselineLo = 0.55, kBaselineHi = 0.80;
constexpr double kComparisonSeconds = 600.0;
constexpr double kSweepSeconds = 1800.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

class Stopwatch {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

// 1: mined batches are K-cliques under tau with tau-separated places.
Outcome criterion1() {
  Outcome o;
  SynthConfig w;
  w.num_cities = 10;
  w.sequences_per_city = 20;
  w.seed = 101;
  const Dataset world = generate_world(w);
  o.expect(world.size() >= 20000, fmt::format("world has {} frames", world.size()));

  MiningConfig m;
  m.N = 60;
  m.K = 4;
  m.tau = 25.0;
  m.clique_fraction = 1.0;
  m.num_batches = 1000;
  m.seed = 1;
  const Stopwatch sw;
  const auto batches = compile_batch_collection(world, nullptr, m, 1);
  const double t = sw.seconds();

  std::size_t places = 0, bad_places = 0, cross_pairs = 0, bad_cross = 0;
  for (const BatchManifest& b : batches) {
    std::set<std::size_t> seen;
    for (const Place& p : b.places) {
      ++places;
      bool ok = p.provenance == Provenance::clique && p.frame_ids.size() == m.K;
      for (std::size_t i = 0; i < p.frame_ids.size(); ++i) {
        ok = ok && seen.insert(p.frame_ids[i]).second;
        for (std::size_t j = i + 1; j < p.frame_ids.size(); ++j) {
          ok = ok && oracle::planar(world.frame(p.frame_ids[i]).position, world.frame(p.frame_ids[j]).position) < m.tau;
        }
      }
      bad_places += !ok;
    }
    for (std::size_t a = 0; a < b.places.size(); ++a) {
      for (std::size_t c = a + 1; c < b.places.size(); ++c) {
        for (std::size_t fa : b.places[a].frame_ids) {
          for (std::size_t fc : b.places[c].frame_ids) {
            ++cross_pairs;
            bad_cross += oracle::planar(world.frame(fa).position, world.frame(fc).position) < m.tau;
          }
        }
      }
    }
  }
  o.expect(batches.size() == 1000, fmt::format("{} batches", batches.size()));
  o.expect(places == 1000 * m.N, fmt::format("{} places", places));
  o.expect(bad_places == 0, fmt::format("{} places are not K-cliques", bad_places));
  o.expect(bad_cross == 0, fmt::format("{} of {} cross-place pairs closer than tau", bad_cross, cross_pairs));
  o.expect(t <= kMiningSeconds, fmt::format("mining took {:.1f}s", t));
  if (o.pass) {
    o.detail = fmt::format("{} frames, {} places, {} cross pairs, {:.1f}s", world.size(), places, cross_pairs, t);
  }
  return o;
}

// 2: clique enumeration agrees with brute force.
Outcome criterion2() {
  Outcome o;
  const Stopwatch sw;
  std::mt19937_64 rng(2);
  std::size_t total = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 6 + static_cast<std::size_t>(t) % 13;  // 6..18
    const double p = (t % 3 + 1) * 0.2;
    const std::size_t k = 3 + static_cast<std::size_t>(t / 3) % 3;
    const auto adj = oracle::random_graph(n, p, 1000 + static_cast<std::uint64_t>(t));
    Graph g(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (adj[i][j]) g.add_edge(i, j);
      }
    }
    const auto want = oracle::cliques_by_subsets(adj, k);
    auto got_list = enumerate_cliques_of_size(g, k);
    std::set<oracle::Ids> got;
    for (auto c : got_list) {
      std::sort(c.begin(), c.end());
      got.insert(c);
    }
    total += want.size();
    if (got != want || got_list.size() != got.size()) {
      o.expect(false, fmt::format("graph {} (n={}, p={}, K={}): {} vs {} cliques", t, n, p, k, got_list.size(),
                                  want.size()));
    }
    // sampled cliques come from the same set
    for (int s = 0; s < 5; ++s) {
      auto c = sample_clique(g, k, rng);
      if (!c) {
        o.expect(want.empty(), fmt::format("graph {}: sampler found nothing", t));
        continue;
      }
      std::sort(c->begin(), c->end());
      o.expect(want.count(*c) == 1, fmt::format("graph {}: sampled a non-clique", t));
    }
  }
  const double secs = sw.seconds();
  o.expect(secs <= kCliqueSeconds, fmt::format("took {:.1f}s", secs));
  if (o.pass) o.detail = fmt::format("50 graphs, {} K-cliques matched, {:.2f}s", total, secs);
  return o;
}

struct RandomBatch {
  Eigen::MatrixXd x;
  Labels labels;
};

RandomBatch random_batch(std::mt19937_64& rng, std::size_t places, std::size_t per_place, std::size_t dim) {
  std::normal_distribution<double> g;
  RandomBatch b;
  b.x = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(places * per_place), static_cast<Eigen::Index>(dim),
                                     [&]() { return g(rng); });
  b.x.rowwise().normalize();
  for (std::size_t p = 0; p < places; ++p) b.labels.insert(b.labels.end(), per_place, p);
  return b;
}

oracle::Masks masks_of(const PairSelection& s) {
  const auto n = static_cast<std::size_t>(s.positives.rows());
  oracle::Masks m{std::vector<std::vector<bool>>(n, std::vector<bool>(n)),
                  std::vector<std::vector<bool>>(n, std::vector<bool>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      m.pos[i][j] = s.positives(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      m.neg[i][j] = s.negatives(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return m;
}

// 3: pair selection equals the O(B^2) direct evaluation.
Outcome criterion3() {
  Outcome o;
  const Stopwatch sw;
  std::mt19937_64 rng(3);
  std::size_t mismatches = 0, pairs = 0;
  for (int t = 0; t < 200; ++t) {
    const RandomBatch b = random_batch(rng, 2 + t % 15, 2 + t % 4, 16);
    const double eps = 0.05 * (t % 5);
    const oracle::Masks got = masks_of(select_pairs(b.x, b.labels, eps));
    const oracle::Masks want = oracle::mining_masks(b.x, b.labels, eps);
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      for (std::size_t j = 0; j < b.labels.size(); ++j) {
        ++pairs;
        mismatches += (got.pos[i][j] != want.pos[i][j]) + (got.neg[i][j] != want.neg[i][j]);
      }
    }
  }
  const double secs = sw.seconds();
  o.expect(mismatches == 0, fmt::format("{} mask entries differ", mismatches));
  o.expect(secs <= kSelectSeconds, fmt::format("took {:.1f}s", secs));
  if (o.pass) o.detail = fmt::format("200 batches, {} pairs, {:.2f}s", pairs, secs);
  return o;
}

// 4: analytic gradient against central differences.
Outcome criterion4() {
  Outcome o;
  const Stopwatch sw;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  double worst = 0.0;
  std::size_t with_beta50 = 0;
  for (int t = 0; t < 100; ++t) {
    const RandomBatch b = random_batch(rng, 3 + t % 5, 2 + t % 3, 8);
    MsParams p;
    p.alpha = u(rng);
    p.beta = t % 4 == 0 ? 50.0 : 10.0 * u(rng);
    with_beta50 += p.beta == 50.0;
    p.lambda = 0.3 + 0.1 * u(rng);
    p.epsilon = 0.1;
    const PairSelection sel = select_pairs(b.x, b.labels, p.epsilon);
    const Eigen::MatrixXd grad = ms_loss_grad(b.x, b.labels, sel, p);
    const oracle::Masks masks = masks_of(sel);
    Eigen::MatrixXd fd(grad.rows(), grad.cols());
    for (Eigen::Index k = 0; k < b.x.size(); ++k) {
      Eigen::MatrixXd plus = b.x, minus = b.x;
      plus(k) += kFdStep;
      minus(k) -= kFdStep;
      fd(k) = (oracle::ms_loss(plus, masks, p.alpha, p.beta, p.lambda) -
               oracle::ms_loss(minus, masks, p.alpha, p.beta, p.lambda)) /
              (2 * kFdStep);
    }
    if (fd.norm() == 0.0 && grad.norm() == 0.0) continue;
    worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  const double secs = sw.seconds();
  o.expect(worst <= kFdRelError, fmt::format("max relative error {:.3g}", worst));
  o.expect(with_beta50 > 0, "no batch used beta = 50");
  o.expect(secs <= kGradSeconds, fmt::format("took {:.1f}s", secs));
  if (o.pass) o.detail = fmt::format("100 batches ({} at beta=50), max rel error {:.3g}, {:.2f}s", with_beta50, worst, secs);
  return o;
}

// 5: knn equals a full sort; recall is monotone in threshold and k.
Outcome criterion5() {
  Outcome o;
  const Stopwatch sw;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 400.0);
  std::size_t wrong = 0, monotone_breaks = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t nq = 50 * static_cast<std::size_t>(t + 1), nd = 1000 - 30 * static_cast<std::size_t>(t);
    const std::size_t dim = 8 + 4 * static_cast<std::size_t>(t % 4);
    EmbeddingMatrix q, db;
    q.values = Eigen::MatrixXf::NullaryExpr(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(dim),
                                            [&]() { return static_cast<float>(g(rng)); });
    db.values = Eigen::MatrixXf::NullaryExpr(static_cast<Eigen::Index>(nd), static_cast<Eigen::Index>(dim),
                                             [&]() { return static_cast<float>(g(rng)); });
    const std::size_t k = 1 + static_cast<std::size_t>(t) * 5;
    const RetrievalResult res = knn_retrieve(q, db, k, 1 + static_cast<std::size_t>(t % 4));
    const Eigen::MatrixXd qd = q.values.cast<double>(), dd = db.values.cast<double>();
    for (std::size_t i = 0; i < nq; ++i) {
      const auto full = oracle::full_rank(qd, i, dd);
      for (std::size_t r = 0; r < k; ++r) {
        wrong += res.indices[i][r] != full[r].second || res.distances[i][r] != full[r].first;
      }
    }

    GeoInfo qg, dg;
    for (std::size_t i = 0; i < nq; ++i) {
      qg.positions.emplace_back(u(rng), u(rng));
      qg.routes.push_back("r");
      qg.seq_index.push_back(i);
    }
    for (std::size_t i = 0; i < nd; ++i) {
      dg.positions.emplace_back(u(rng), u(rng));
      dg.routes.push_back("r");
      dg.seq_index.push_back(i);
    }
    std::vector<std::size_t> ks;
    for (std::size_t c = 1; c <= k; c += 1 + k / 6) ks.push_back(c);
    const std::vector<double> ts{1, 5, 10, 25, 50, 100, 200};
    const RecallReport curve = recall_vs_threshold_curve(res, qg, dg, ts, ks, ThresholdMode::meters);
    auto at = [&](std::size_t ti, std::size_t ki) { return curve.rows[ti * ks.size() + ki].recall; };
    for (std::size_t ti = 0; ti < ts.size(); ++ti) {
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        if (ti > 0 && at(ti, ki) < at(ti - 1, ki)) ++monotone_breaks;
        if (ki > 0 && at(ti, ki) < at(ti, ki - 1)) ++monotone_breaks;
      }
    }
  }
  const double secs = sw.seconds();
  o.expect(wrong == 0, fmt::format("{} neighbor slots differ from the full sort", wrong));
  o.expect(monotone_breaks == 0, fmt::format("{} monotonicity violations", monotone_breaks));
  o.expect(secs <= kKnnSeconds, fmt::format("took {:.1f}s", secs));
  if (o.pass) o.detail = fmt::format("20 instances up to 1000x1000, {:.2f}s", secs);
  return o;
}

// 6: ordering probability bounds and exhaustive GDS binning.
Outcome criterion6() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::normal_distribution<double> g;
  std::vector<Position> pos;
  Eigen::MatrixXd mono(500, 2), indep(500, 16);
  for (Eigen::Index i = 0; i < 500; ++i) {
    pos.emplace_back(u(rng), u(rng));
    mono.row(i) = 0.01 * pos.back().transpose();  // distances scale with geography
    for (Eigen::Index c = 0; c < 16; ++c) indep(i, c) = g(rng);
  }
  const OrderingEstimate m = ordering_probability(mono, pos, kNullTrials, 1);
  o.expect(m.estimate == 1.0, fmt::format("monotone embedder scores {}", m.estimate));
  const OrderingEstimate n = ordering_probability(indep, pos, kNullTrials, 2);
  o.expect(n.estimate >= kNullLo && n.estimate <= kNullHi, fmt::format("independent embedder scores {}", n.estimate));

  SynthConfig c;
  c.num_cities = 1;
  c.sequences_per_city = 2;
  c.path_length = 120.0;
  c.raw_dim = 16;
  c.seed = 7;
  const Dataset w = generate_world(c);
  o.expect(w.size() == 50, fmt::format("world has {} frames", w.size()));
  const Eigen::MatrixXd x = as_double(w.embeddings());
  std::vector<Position> wp;
  for (const Frame& f : w.frames()) wp.push_back(f.position);
  const auto edges = default_gds_edges();
  std::vector<std::pair<std::size_t, double>> samples;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = i + 1; j < w.size(); ++j) {
      samples.emplace_back(oracle::bin_of(edges, oracle::planar(wp[i], wp[j])), oracle::l2(x, i, x, j));
    }
  }
  const auto want = oracle::two_pass(samples, edges.size());
  const GdsProfile got = gds_profile(x, wp, edges, samples.size(), 1);
  double worst = 0.0;
  for (std::size_t b = 0; b < edges.size(); ++b) {
    o.expect(got.bins[b].count == want[b].count, fmt::format("bin {} count {} vs {}", b, got.bins[b].count, want[b].count));
    worst = std::max({worst, std::abs(got.bins[b].mean - want[b].mean), std::abs(got.bins[b].std - want[b].std)});
  }
  o.expect(worst <= kGdsTolerance, fmt::format("gds differs by {:.3g}", worst));
  if (o.pass) {
    o.detail = fmt::format("monotone {}, independent {:.4f} +- {:.4f}, gds max diff {:.2g}", m.estimate, n.estimate,
                           n.std_error, worst);
  }
  return o;
}

// 7: clique-mined training beats random places.
Outcome criterion7() {
  Outcome o;
  ExperimentConfig cfg = default_experiment_config();
  cfg.num_seeds = 5;
  const std::vector<ArmSpec> arms{{"clique", ArmKind::clique, {}, {}, {}, {}},
                                  {"random", ArmKind::random, {}, {}, {}, {}}};
  const Stopwatch sw;
  const ComparisonSummary s = run_comparison(cfg, arms);
  const double secs = sw.seconds();
  std::cerr << comparison_csv(s) << comparison_summary_csv(s);

  const double clique = s.median("clique", &ArmMetrics::recall1);
  const double random = s.median("random", &ArmMetrics::recall1);
  const double gain_of_medians = clique - random;
  const double median_gain = s.median_delta("clique", "random", &ArmMetrics::recall1);
  o.expect(gain_of_medians >= kRecallGain && median_gain >= kRecallGain,
           fmt::format("R@1 gain {:.4f} (median of deltas {:.4f})", gain_of_medians, median_gain));
  const double slope_c = s.median("clique", &ArmMetrics::gds_slope);
  const double slope_r = s.median("random", &ArmMetrics::gds_slope);
  o.expect(slope_c > slope_r, fmt::format("GDS slope {:.3g} vs {:.3g}", slope_c, slope_r));
  const double std_c = s.median("clique", &ArmMetrics::gds_std);
  const double std_r = s.median("random", &ArmMetrics::gds_std);
  o.expect(std_c < std_r, fmt::format("GDS std {:.4g} vs {:.4g}", std_c, std_r));
  o.expect(random >= kBaselineLo && random <= kBaselineHi, fmt::format("baseline R@1 {:.4f}", random));
  o.expect(secs <= kComparisonSeconds, fmt::format("took {:.0f}s", secs));
  if (o.pass) {
    o.detail = fmt::format("R@1 {:.4f} vs {:.4f} (gain {:.4f}, median delta {:.4f}), slope {:.3g} vs {:.3g}, "
                           "std {:.4g} vs {:.4g}, {:.0f}s",
                           clique, random, gain_of_medians, median_gain, slope_c, slope_r, std_c, std_r, secs);
  }
  return o;
}

// 8: tau sweep peaks at 25 m; dropping MS pair mining hurts.
Outcome criterion8() {
  Outcome o;
  ExperimentConfig cfg = default_experiment_config();
  cfg.num_seeds = 5;
  std::vector<ArmSpec> arms;
  const std::vector<double> taus{10, 15, 20, 25, 30};
  for (double t : taus) arms.push_back({fmt::format("tau{}", t), ArmKind::clique, t, {}, {}, {}});
  arms.push_back({"no-ms-mining", ArmKind::clique, 25.0, false, {}, {}});
  const Stopwatch sw;
  const ComparisonSummary s = run_comparison(cfg, arms);
  const double secs = sw.seconds();
  std::cerr << comparison_summary_csv(s);

  std::string table;
  std::string best;
  double best_r = -1.0;
  for (const ArmSpec& a : arms) {
    const double r = s.median(a.name, &ArmMetrics::recall1);
    table += fmt::format("{}{} {:.4f}", table.empty() ? "" : ", ", a.name, r);
    if (a.ms_mining.value_or(true) && r > best_r) {
      best_r = r;
      best = a.name;
    }
  }
  o.expect(best == "tau25", "best tau is " + best);
  o.expect(s.median("no-ms-mining", &ArmMetrics::recall1) < s.median("tau25", &ArmMetrics::recall1),
           "no-ms-mining is not worse than tau25");
  o.expect(secs <= kSweepSeconds, fmt::format("took {:.0f}s", secs));
  o.detail = (o.pass ? "" : o.detail + " | ") + table + fmt::format(", {:.0f}s", secs);
  return o;
}

// 9: CLI output is byte-identical across runs and thread counts.
Outcome criterion9() {
  Outcome o;
  support::TempDir dir("acceptance-cli");
  const auto files = cli::pipeline(dir / "a", dir.path(), 1);
  cli::pipeline(dir / "b", dir.path(), 1);
  cli::pipeline(dir / "c", dir.path(), 4);
  std::size_t bytes = 0;
  for (const auto& f : files) {
    const std::string a = support::slurp(dir / "a" / f);
    bytes += a.size();
    o.expect(!a.empty(), f + " is empty");
    o.expect(a == support::slurp(dir / "b" / f), f + " differs between runs");
    o.expect(a == support::slurp(dir / "c" / f), f + " differs between 1 and 4 threads");
  }
  if (o.pass) o.detail = fmt::format("{} files, {} bytes identical across 3 runs", files.size(), bytes);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                       criterion6, criterion7, criterion8, criterion9};
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty()) {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  }
  bool all = true;
  for (int n : which) {
    if (n < 1 || n > 9) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    fmt::print("criterion {}: {} {}\n", n, o.pass ? "PASS" : "FAIL", o.detail);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
