#include "cliquemining/mining.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/core.h>
#include <json.hpp>

#include "cliquemining/config_json.hpp"

namespace cliquemining {

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::weighted: return "weighted";
    case SamplingMode::most_similar: return "most-similar";
    case SamplingMode::uniform: return "uniform";
  }
  return "weighted";
}

SamplingMode parse_sampling_mode(const std::string& text) {
  if (text == "weighted") return SamplingMode::weighted;
  if (text == "most-similar" || text == "most_similar") return SamplingMode::most_similar;
  if (text == "uniform") return SamplingMode::uniform;
  throw std::invalid_argument("unknown sampling mode '" + text + "'");
}

void MiningConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid mining config: " + what); };
  if (!(clique_fraction > 0.0 && clique_fraction <= 1.0)) fail("clique_fraction must be in (0, 1]");
  if (K < 2) fail("K must be >= 2");
  if (N < 1) fail("N must be >= 1");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(similarity_temperature > 0.0)) fail("similarity_temperature must be > 0");
}

std::size_t MiningConfig::clique_places() const {
  return std::min<std::size_t>(N, static_cast<std::size_t>(std::ceil(clique_fraction * static_cast<double>(N) - 1e-9)));
}

std::size_t BatchManifest::image_count() const {
  std::size_t total = 0;
  for (const Place& p : places) total += p.frame_ids.size();
  return total;
}

double sequence_similarity(const Dataset& ds, std::size_t a, std::size_t b) {
  const auto& seqs = ds.sequences();
  const Eigen::VectorXd xa = ds.embeddings().row(central_frame(seqs.at(a)));
  const Eigen::VectorXd xb = ds.embeddings().row(central_frame(seqs.at(b)));
  const double denom = xa.norm() * xb.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(xa.dot(xb) / denom, -1.0, 1.0);
}

double sequence_similarity(const Dataset& ds, const std::string& a, const std::string& b) {
  const auto ia = ds.find_sequence(a);
  const auto ib = ds.find_sequence(b);
  if (!ia) throw std::invalid_argument("unknown seq_id '" + a + "'");
  if (!ib) throw std::invalid_argument("unknown seq_id '" + b + "'");
  return sequence_similarity(ds, *ia, *ib);
}

std::vector<std::size_t> select_companions(const Dataset& ds, std::size_t reference,
                                           const std::vector<std::size_t>& pool, const MiningConfig& cfg, Rng& rng) {
  const std::size_t take = std::min(cfg.S, pool.size());
  std::vector<std::size_t> out;
  out.reserve(take);
  if (take == 0) return out;

  switch (cfg.sampling_mode) {
    case SamplingMode::uniform: {
      std::vector<std::size_t> rest = pool;
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
        std::swap(rest[i], rest[pick(rng)]);
        out.push_back(rest[i]);
      }
      return out;
    }
    case SamplingMode::most_similar: {
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t s : pool) scored.emplace_back(sequence_similarity(ds, reference, s), s);
      std::stable_sort(scored.begin(), scored.end(), [&ds](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return ds.sequences()[a.second].seq_id < ds.sequences()[b.second].seq_id;
      });
      for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
      return out;
    }
    case SamplingMode::weighted: {
      std::vector<std::size_t> rest = pool;
      std::vector<double> logits;
      for (std::size_t s : rest) logits.push_back(sequence_similarity(ds, reference, s) / cfg.similarity_temperature);
      for (std::size_t i = 0; i < take; ++i) {
        const double top = *std::max_element(logits.begin(), logits.end());
        std::vector<double> w(logits.size());
        std::transform(logits.begin(), logits.end(), w.begin(), [top](double l) { return std::exp(l - top); });
        std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
        const std::size_t j = pick(rng);
        out.push_back(rest[j]);
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
        logits.erase(logits.begin() + static_cast<std::ptrdiff_t>(j));
      }
      return out;
    }
  }
  return out;
}

std::vector<std::size_t> select_sequences(const Dataset& ds, const MiningConfig& cfg, Rng& rng) {
  const auto& cities = ds.cities();
  if (cities.empty()) throw InfeasibleError("dataset has no sequences");
  std::uniform_int_distribution<std::size_t> pick_city(0, cities.size() - 1);
  const City& city = cities[pick_city(rng)];
  std::uniform_int_distribution<std::size_t> pick_ref(0, city.sequences.size() - 1);
  const std::size_t reference = city.sequences[pick_ref(rng)];
  std::vector<std::size_t> pool;
  for (std::size_t s : city.sequences) {
    if (s != reference) pool.push_back(s);
  }
  std::vector<std::size_t> chosen{reference};
  const auto companions = select_companions(ds, reference, pool, cfg, rng);
  chosen.insert(chosen.end(), companions.begin(), companions.end());
  return chosen;
}

CandidateGraph build_candidate_graph(const Dataset& ds, const MiningConfig& cfg, Rng& rng) {
  std::vector<std::size_t> frames;
  for (std::size_t s : select_sequences(ds, cfg, rng)) {
    const auto& ids = ds.sequences()[s].frame_ids;
    frames.insert(frames.end(), ids.begin(), ids.end());
  }
  return CandidateGraph::build(ds, std::move(frames), cfg.tau);
}

std::optional<std::vector<std::size_t>> sample_clique(const Graph& g, std::size_t k, Rng& rng) {
  std::vector<std::size_t> rank(g.order());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::shuffle(rank.begin(), rank.end(), rng);
  MaximalCliqueEnumerator search(g, k, std::move(rank));
  auto clique = search.next();
  if (!clique) return std::nullopt;
  std::shuffle(clique->begin(), clique->end(), rng);
  clique->resize(k);
  std::sort(clique->begin(), clique->end());
  return clique;
}

std::optional<Place> sample_place(const CandidateGraph& g, std::size_t k, Rng& rng) {
  auto local = sample_clique(g.graph, k, rng);
  if (!local) return std::nullopt;
  Place place;
  for (std::size_t v : *local) place.frame_ids.push_back(g.vertices[v]);
  return place;
}

std::vector<Place> mix_sparse_places(const Dataset& sparse, std::size_t count, std::size_t k, Rng& rng) {
  std::vector<Place> out;
  if (count == 0) return out;
  const auto& groups = sparse.sequences();
  if (groups.size() < count) {
    throw InfeasibleError(fmt::format("sparse source has {} place groups, {} requested", groups.size(), count));
  }
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
    const Sequence& group = groups[order[i]];
    if (group.frame_ids.size() < k) {
      throw InfeasibleError(fmt::format("sparse place group '{}' has {} frames, K = {}", group.seq_id,
                                        group.frame_ids.size(), k));
    }
    std::vector<std::size_t> frames = group.frame_ids;
    std::shuffle(frames.begin(), frames.end(), rng);
    frames.resize(k);
    std::sort(frames.begin(), frames.end());
    out.push_back(Place{0, Provenance::sparse, std::move(frames)});
  }
  return out;
}

namespace {

void exclude_near(CandidateGraph& g, const std::vector<Position>& taken) {
  if (taken.empty()) return;
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    if (!g.graph.alive(v)) continue;
    for (const Position& p : taken) {
      if (geo_distance(g.positions[v], p) < g.tau) {
        g.graph.remove_vertex(v);
        break;
      }
    }
  }
}

}  // namespace

BatchManifest sample_batch(const Dataset& ds, const Dataset* sparse, const MiningConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t quota = cfg.clique_places();
  BatchManifest batch;
  std::vector<Position> taken;
  std::size_t restarts = 0;
  CandidateGraph g = build_candidate_graph(ds, cfg, rng);
  while (batch.places.size() < quota) {
    auto local = sample_clique(g.graph, cfg.K, rng);
    if (!local) {
      if (restarts == cfg.max_graph_restarts) {
        throw InfeasibleError(fmt::format("no {}-clique under tau = {} m after {} graph restarts ({} of {} places mined)",
                                          cfg.K, cfg.tau, restarts, batch.places.size(), quota));
      }
      ++restarts;
      g = build_candidate_graph(ds, cfg, rng);
      exclude_near(g, taken);
      continue;
    }
    Place place;
    place.provenance = Provenance::clique;
    std::vector<std::size_t> doomed;
    for (std::size_t v : *local) {
      place.frame_ids.push_back(g.vertices[v]);
      taken.push_back(g.positions[v]);
      doomed.push_back(v);
      const auto& nbrs = g.graph.neighbors(v);
      doomed.insert(doomed.end(), nbrs.begin(), nbrs.end());
    }
    for (std::size_t v : doomed) g.graph.remove_vertex(v);
    batch.places.push_back(std::move(place));
  }
  const std::size_t rest = cfg.N - quota;
  if (rest > 0) {
    if (sparse == nullptr) throw InfeasibleError(fmt::format("{} sparse places requested but no sparse source", rest));
    auto extra = mix_sparse_places(*sparse, rest, cfg.K, rng);
    batch.places.insert(batch.places.end(), extra.begin(), extra.end());
  }
  for (std::size_t i = 0; i < batch.places.size(); ++i) batch.places[i].label = i + 1;
  return batch;
}

BatchManifest sample_random_place_batch(const Dataset& sparse, const MiningConfig& cfg, Rng& rng) {
  BatchManifest batch;
  batch.places = mix_sparse_places(sparse, cfg.N, cfg.K, rng);
  for (std::size_t i = 0; i < batch.places.size(); ++i) batch.places[i].label = i + 1;
  return batch;
}

namespace {

template <typename Fn>
std::vector<BatchManifest> parallel_batches(std::size_t count, std::size_t threads, Fn&& make) {
  std::vector<BatchManifest> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t b = next++; b < count; b = next++) {
      try {
        out[b] = make(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace

std::vector<BatchManifest> compile_batch_collection(const Dataset& ds, const Dataset* sparse, const MiningConfig& cfg,
                                                    std::size_t threads) {
  cfg.validate();
  return parallel_batches(cfg.num_batches, threads, [&](std::size_t b) {
    Rng rng = make_rng(cfg.seed, kStreamBatch, b);
    return sample_batch(ds, sparse, cfg, rng);
  });
}

std::vector<BatchManifest> compile_random_collection(const Dataset& sparse, const MiningConfig& cfg,
                                                     std::size_t threads) {
  cfg.validate();
  return parallel_batches(cfg.num_batches, threads, [&](std::size_t b) {
    Rng rng = make_rng(cfg.seed, kStreamBatch, b);
    return sample_random_place_batch(sparse, cfg, rng);
  });
}

std::vector<std::string> check_manifest(const BatchManifest& batch, const Dataset& ds, const MiningConfig& cfg) {
  std::vector<std::string> issues;
  std::vector<std::size_t> labels;
  for (const Place& p : batch.places) labels.push_back(p.label);
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end()) issues.push_back("duplicate place labels");

  std::vector<const Place*> cliques;
  for (const Place& p : batch.places) {
    if (p.provenance == Provenance::clique) cliques.push_back(&p);
  }
  for (const Place* p : cliques) {
    if (p->frame_ids.size() != cfg.K) {
      issues.push_back(fmt::format("place {} has {} frames, expected {}", p->label, p->frame_ids.size(), cfg.K));
    }
    for (std::size_t i = 0; i < p->frame_ids.size(); ++i) {
      for (std::size_t j = i + 1; j < p->frame_ids.size(); ++j) {
        const double d = geo_distance(ds.frame(p->frame_ids[i]).position, ds.frame(p->frame_ids[j]).position);
        if (!(d < cfg.tau)) {
          issues.push_back(fmt::format("place {}: frames {} and {} are {} m apart (tau {})", p->label,
                                       p->frame_ids[i], p->frame_ids[j], d, cfg.tau));
        }
      }
    }
  }
  for (std::size_t a = 0; a < cliques.size(); ++a) {
    for (std::size_t b = a + 1; b < cliques.size(); ++b) {
      for (std::size_t fa : cliques[a]->frame_ids) {
        for (std::size_t fb : cliques[b]->frame_ids) {
          const double d = geo_distance(ds.frame(fa).position, ds.frame(fb).position);
          if (d < cfg.tau) {
            issues.push_back(fmt::format("places {} and {}: frames {} and {} only {} m apart", cliques[a]->label,
                                         cliques[b]->label, fa, fb, d));
          }
        }
      }
    }
  }
  return issues;
}

void save_batch_collection(const BatchCollection& collection, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format"] = "cliquemining-batches";
  header["version"] = 1;
  header["config"] = collection.config;
  header["seed"] = collection.config.seed;
  header["dataset_fingerprint"] = collection.dataset_fingerprint;
  header["sparse_fingerprint"] = collection.sparse_fingerprint;

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open batch collection for writing: " + path.string());
  out << "{\"header\":" << header.dump() << ",\n\"batches\":[";
  for (std::size_t b = 0; b < collection.batches.size(); ++b) {
    nlohmann::ordered_json places = nlohmann::ordered_json::array();
    for (const Place& p : collection.batches[b].places) {
      nlohmann::ordered_json jp;
      jp["label"] = p.label;
      jp["provenance"] = p.provenance == Provenance::clique ? "clique" : "sparse";
      jp["frame_ids"] = p.frame_ids;
      places.push_back(std::move(jp));
    }
    nlohmann::ordered_json jb;
    jb["places"] = std::move(places);
    out << (b == 0 ? "\n" : ",\n") << jb.dump();
  }
  out << "\n]}\n";
  if (!out) throw std::runtime_error("failed writing batch collection: " + path.string());
}

BatchCollection load_batch_collection(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open batch collection: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  BatchCollection c;
  const auto& header = j.at("header");
  c.config = header.at("config").get<MiningConfig>();
  c.dataset_fingerprint = header.value("dataset_fingerprint", "");
  c.sparse_fingerprint = header.value("sparse_fingerprint", "");
  for (const auto& jb : j.at("batches")) {
    BatchManifest batch;
    for (const auto& jp : jb.at("places")) {
      Place p;
      p.label = jp.at("label").get<std::size_t>();
      const auto prov = jp.at("provenance").get<std::string>();
      if (prov != "clique" && prov != "sparse") throw std::runtime_error(path.string() + ": bad provenance " + prov);
      p.provenance = prov == "clique" ? Provenance::clique : Provenance::sparse;
      p.frame_ids = jp.at("frame_ids").get<std::vector<std::size_t>>();
      batch.places.push_back(std::move(p));
    }
    c.batches.push_back(std::move(batch));
  }
  return c;
}

}  // namespace cliquemining
