#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliquemining/dataset.hpp"
#include "cliquemining/mining.hpp"
#include "cliquemining/ms_loss.hpp"

namespace cliquemining {

/// Linear map followed by row normalization: x = normalize(W raw).
struct ToyEmbedder {
  Eigen::MatrixXd W;  // d_out x d_raw

  [[nodiscard]] std::size_t out_dim() const { return static_cast<std::size_t>(W.rows()); }
  [[nodiscard]] std::size_t in_dim() const { return static_cast<std::size_t>(W.cols()); }
};

enum class InitMode { identity, gaussian };
std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& text);

struct TrainConfig {
  std::size_t epochs = 3;
  double learning_rate = 0.05;
  double momentum = 0.9;
  InitMode init = InitMode::identity;
  std::size_t out_dim = 0;  // 0: same as the raw dimension
  bool shuffle = false;     // reshuffle batch order every epoch
  bool recompute_cliques = false;
  std::uint64_t seed = 0;

  void validate() const;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

ToyEmbedder init_embedder(std::size_t raw_dim, const TrainConfig& cfg);

/// normalize(W raw) row by row; flagged normalized.
EmbeddingMatrix embed(const ToyEmbedder& e, const Eigen::MatrixXd& raw);
EmbeddingMatrix embed(const ToyEmbedder& e, const EmbeddingMatrix& raw);

/// Loss and dL/dW for one batch of raw rows, chaining the MS gradient through
/// the row normalization and the linear map.
struct BatchGradient {
  double loss = 0.0;
  Eigen::MatrixXd grad_W;
  std::size_t selected_pos = 0;
  std::size_t selected_neg = 0;
};
BatchGradient batch_gradient(const ToyEmbedder& e, const Eigen::MatrixXd& raw_rows, const Labels& labels,
                             const MsParams& params);

struct TraceRow {
  std::size_t step = 0;
  double loss = 0.0;
  std::size_t selected_pos = 0;
  std::size_t selected_neg = 0;
};

struct TrainResult {
  ToyEmbedder embedder;
  std::vector<TraceRow> trace;
};

/// Raw features addressed by a batch: clique places index `dense`, sparse
/// places index `sparse`.
struct RawSources {
  const Eigen::MatrixXd* dense = nullptr;
  const Eigen::MatrixXd* sparse = nullptr;
};

/// Stacks a batch's raw rows (place by place) and returns the place labels.
Eigen::MatrixXd gather_batch(const BatchManifest& batch, const RawSources& raw, Labels& labels);

/// Called before every epoch after the first when recompute_cliques is set;
/// returns the batches for that epoch given the current embedder.
using BatchRecompute = std::function<std::vector<BatchManifest>(std::size_t epoch, const ToyEmbedder&)>;

TrainResult train_toy_embedder(const RawSources& raw, const std::vector<BatchManifest>& batches,
                               const MsParams& params, const TrainConfig& cfg, const BatchRecompute& recompute = {});

void save_embedder(const ToyEmbedder& e, const std::filesystem::path& path);
ToyEmbedder load_embedder(const std::filesystem::path& path);

}  // namespace cliquemining
