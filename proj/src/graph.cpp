#include "cliquemining/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "cliquemining/rng.hpp"

namespace cliquemining {

Graph::Graph(std::size_t n)
    : words_((n + 63) / 64), bits_(n * ((n + 63) / 64), 0), neighbors_(n), alive_(n, 1) {}

void Graph::add_edge(std::size_t a, std::size_t b) {
  if (a == b) throw std::invalid_argument("Graph::add_edge: self-loop");
  if (adjacent(a, b)) return;
  bits_[a * words_ + b / 64] |= std::uint64_t{1} << (b % 64);
  bits_[b * words_ + a / 64] |= std::uint64_t{1} << (a % 64);
  neighbors_[a].push_back(b);
  neighbors_[b].push_back(a);
}

void Graph::remove_vertex(std::size_t v) {
  if (!alive_[v]) return;
  alive_[v] = 0;
  for (std::size_t w : neighbors_[v]) {
    bits_[w * words_ + v / 64] &= ~(std::uint64_t{1} << (v % 64));
    bits_[v * words_ + w / 64] &= ~(std::uint64_t{1} << (w % 64));
    auto& list = neighbors_[w];
    list.erase(std::remove(list.begin(), list.end(), v), list.end());
  }
  neighbors_[v].clear();
}

std::vector<std::size_t> Graph::live_vertices() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < alive_.size(); ++v) {
    if (alive_[v]) out.push_back(v);
  }
  return out;
}

std::size_t Graph::edge_count() const {
  std::size_t total = 0;
  for (const auto& n : neighbors_) total += n.size();
  return total / 2;
}

CandidateGraph CandidateGraph::build(const Dataset& ds, std::vector<std::size_t> frame_ids, double tau) {
  CandidateGraph cg;
  cg.tau = tau;
  cg.vertices = std::move(frame_ids);
  cg.positions.reserve(cg.vertices.size());
  for (std::size_t id : cg.vertices) cg.positions.push_back(ds.frame(id).position);
  cg.graph = Graph(cg.vertices.size());
  if (!(tau > 0.0)) return cg;

  // Uniform grid with cell side tau: candidates lie in the 3x3 neighborhood.
  auto cell_of = [tau](const Position& p) {
    return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x() / tau)),
                                                 static_cast<std::int64_t>(std::floor(p.y() / tau))};
  };
  auto key = [](std::int64_t cx, std::int64_t cy) {
    return static_cast<std::uint64_t>(cx) * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(cy);
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < cg.positions.size(); ++i) {
    const auto [cx, cy] = cell_of(cg.positions[i]);
    cells[key(cx, cy)].push_back(i);
  }
  for (std::size_t i = 0; i < cg.positions.size(); ++i) {
    const auto [cx, cy] = cell_of(cg.positions[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        const auto it = cells.find(key(cx + dx, cy + dy));
        if (it == cells.end()) continue;
        for (std::size_t j : it->second) {
          if (j <= i) continue;
          if (geo_distance(cg.positions[i], cg.positions[j]) < tau) cg.graph.add_edge(i, j);
        }
      }
    }
  }
  return cg;
}

MaximalCliqueEnumerator::MaximalCliqueEnumerator(const Graph& g, std::size_t min_size, std::vector<std::size_t> rank)
    : g_(&g), min_size_(min_size), mark_(g.order(), 0), rank_(std::move(rank)) {
  if (rank_.empty()) {
    rank_.resize(g.order());
    std::iota(rank_.begin(), rank_.end(), std::size_t{0});
  }
  if (rank_.size() != g.order()) throw std::invalid_argument("MaximalCliqueEnumerator: rank size mismatch");
  auto p = g.live_vertices();
  if (p.size() >= min_size_) stack_.push_back(make_frame(0, std::move(p), {}));
}

MaximalCliqueEnumerator::Frame MaximalCliqueEnumerator::make_frame(std::size_t depth, std::vector<std::size_t> p,
                                                                   std::vector<std::size_t> x) const {
  Frame f{depth, std::move(p), std::move(x), {}, 0};
  if (f.p.empty()) return f;

  // Pivot: vertex of P u X with the most neighbors in P.
  ++stamp_;
  for (std::size_t v : f.p) mark_[v] = stamp_;
  std::size_t pivot = f.p.front();
  std::size_t best = 0;
  bool first = true;
  auto consider = [&](std::size_t u) {
    std::size_t count = 0;
    for (std::size_t w : g_->neighbors(u)) count += mark_[w] == stamp_;
    if (first || count > best) {
      pivot = u;
      best = count;
      first = false;
    }
  };
  for (std::size_t u : f.p) consider(u);
  for (std::size_t u : f.x) consider(u);

  for (std::size_t v : f.p) {
    if (v == pivot || !g_->adjacent(pivot, v)) f.branch.push_back(v);
  }
  std::sort(f.branch.begin(), f.branch.end(), [this](std::size_t a, std::size_t b) { return rank_[a] < rank_[b]; });
  return f;
}

std::optional<std::vector<std::size_t>> MaximalCliqueEnumerator::next() {
  while (!stack_.empty()) {
    Frame& top = stack_.back();
    if (top.cursor >= top.branch.size()) {
      const bool leaf = top.p.empty() && top.x.empty();
      const std::size_t depth = top.depth;
      stack_.pop_back();
      if (leaf && depth >= min_size_ && depth > 0) {
        std::vector<std::size_t> out(clique_.begin(), clique_.begin() + static_cast<std::ptrdiff_t>(depth));
        std::sort(out.begin(), out.end());
        return out;
      }
      continue;
    }
    const std::size_t v = top.branch[top.cursor++];
    std::vector<std::size_t> p, x;
    for (std::size_t w : top.p) {
      if (w != v && g_->adjacent(v, w)) p.push_back(w);
    }
    for (std::size_t w : top.x) {
      if (g_->adjacent(v, w)) x.push_back(w);
    }
    top.p.erase(std::find(top.p.begin(), top.p.end(), v));
    top.x.push_back(v);
    const std::size_t depth = top.depth + 1;
    clique_.resize(depth - 1);
    clique_.push_back(v);
    if (depth + p.size() < min_size_) continue;
    stack_.push_back(make_frame(depth, std::move(p), std::move(x)));
  }
  return std::nullopt;
}

std::size_t KCliqueStream::IdsHash::operator()(const std::vector<std::size_t>& ids) const noexcept {
  std::uint64_t h = 0;
  for (std::size_t v : ids) h = mix64(h ^ v);
  return static_cast<std::size_t>(h);
}

KCliqueStream::KCliqueStream(const Graph& g, std::size_t k) : enumerator_(g, std::max<std::size_t>(k, 1)), k_(k) {
  if (k == 0) throw std::invalid_argument("KCliqueStream: K must be >= 1");
}

bool KCliqueStream::advance_combination() {
  const std::size_t n = current_.size();
  if (!has_combo_) {
    combo_.resize(k_);
    std::iota(combo_.begin(), combo_.end(), std::size_t{0});
    has_combo_ = true;
    return true;
  }
  for (std::size_t i = k_; i-- > 0;) {
    if (combo_[i] < n - k_ + i) {
      ++combo_[i];
      for (std::size_t j = i + 1; j < k_; ++j) combo_[j] = combo_[j - 1] + 1;
      return true;
    }
  }
  return false;
}

std::optional<std::vector<std::size_t>> KCliqueStream::next() {
  while (true) {
    if (!current_.empty() && advance_combination()) {
      std::vector<std::size_t> subset(k_);
      for (std::size_t i = 0; i < k_; ++i) subset[i] = current_[combo_[i]];
      if (emitted_.insert(subset).second) return subset;
      continue;
    }
    auto clique = enumerator_.next();
    if (!clique) return std::nullopt;
    current_ = std::move(*clique);
    has_combo_ = false;
  }
}

std::vector<std::vector<std::size_t>> enumerate_cliques_of_size(const Graph& g, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  KCliqueStream stream(g, k);
  while (auto c = stream.next()) out.push_back(std::move(*c));
  return out;
}

}  // namespace cliquemining
