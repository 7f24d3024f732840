#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "cliquemining/dataset.hpp"

namespace cliquemining {

/// Undirected graph over dense local vertex ids 0..n-1 with a bit-matrix for
/// O(1) adjacency tests and neighbor lists for O(deg) iteration. Vertices can
/// be removed; removed vertices disappear from every query.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::size_t n);

  void add_edge(std::size_t a, std::size_t b);
  void remove_vertex(std::size_t v);

  [[nodiscard]] std::size_t order() const { return neighbors_.size(); }
  [[nodiscard]] bool alive(std::size_t v) const { return alive_[v] != 0; }
  [[nodiscard]] bool adjacent(std::size_t a, std::size_t b) const {
    return (bits_[a * words_ + b / 64] >> (b % 64)) & 1U;
  }
  /// Live neighbors of a live vertex.
  [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t v) const { return neighbors_[v]; }
  [[nodiscard]] std::vector<std::size_t> live_vertices() const;
  [[nodiscard]] std::size_t edge_count() const;

 private:
  std::size_t words_ = 0;
  std::vector<std::uint64_t> bits_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::uint8_t> alive_;
};

/// Frames of descriptor-similar sequences joined when closer than tau meters.
struct CandidateGraph {
  std::vector<std::size_t> vertices;  // frame ids, indexed by local vertex id
  std::vector<Position> positions;
  Graph graph;
  double tau = 25.0;

  /// Edges e_ij iff geo_distance < tau (strict); no self-loops.
  static CandidateGraph build(const Dataset& ds, std::vector<std::size_t> frame_ids, double tau);
};

/// Tomita-style pivoting Bron-Kerbosch with an explicit stack. Yields maximal
/// cliques one at a time, visiting candidate vertices in the order given by
/// `rank` (lower rank first). Branches that cannot reach `min_size` vertices
/// are pruned, so only maximal cliques of at least that size are produced.
class MaximalCliqueEnumerator {
 public:
  MaximalCliqueEnumerator(const Graph& g, std::size_t min_size, std::vector<std::size_t> rank = {});

  /// Next maximal clique (sorted local ids), or nullopt when exhausted.
  std::optional<std::vector<std::size_t>> next();

 private:
  struct Frame {
    std::size_t depth;
    std::vector<std::size_t> p;
    std::vector<std::size_t> x;
    std::vector<std::size_t> branch;
    std::size_t cursor = 0;
  };

  Frame make_frame(std::size_t depth, std::vector<std::size_t> p, std::vector<std::size_t> x) const;

  const Graph* g_;
  std::size_t min_size_;
  mutable std::vector<std::uint32_t> mark_;
  mutable std::uint32_t stamp_ = 0;
  std::vector<std::size_t> rank_;
  std::vector<std::size_t> clique_;
  std::vector<Frame> stack_;
};

/// Lazily produced stream of K-vertex cliques: the K-subsets of each maximal
/// clique of size >= K, skipping subsets already emitted from an earlier
/// maximal clique. Exhausting it yields every K-clique exactly once.
class KCliqueStream {
 public:
  KCliqueStream(const Graph& g, std::size_t k);

  std::optional<std::vector<std::size_t>> next();

 private:
  bool advance_combination();

  MaximalCliqueEnumerator enumerator_;
  std::size_t k_;
  std::vector<std::size_t> current_;  // current maximal clique
  std::vector<std::size_t> combo_;    // indices into current_
  bool has_combo_ = false;

  struct IdsHash {
    std::size_t operator()(const std::vector<std::size_t>& ids) const noexcept;
  };
  std::unordered_set<std::vector<std::size_t>, IdsHash> emitted_;
};

std::vector<std::vector<std::size_t>> enumerate_cliques_of_size(const Graph& g, std::size_t k);

}  // namespace cliquemining
