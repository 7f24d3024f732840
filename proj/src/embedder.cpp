#include "cliquemining/embedder.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "cliquemining/rng.hpp"

namespace cliquemining {

std::string to_string(InitMode mode) { return mode == InitMode::identity ? "identity" : "gaussian"; }

InitMode parse_init_mode(const std::string& text) {
  if (text == "identity") return InitMode::identity;
  if (text == "gaussian") return InitMode::gaussian;
  throw std::invalid_argument("unknown init mode '" + text + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: learning_rate must be > 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train config: momentum must be in [0, 1)");
  if (out_dim == 1) throw std::invalid_argument("train config: out_dim must be >= 2");
}

ToyEmbedder init_embedder(std::size_t raw_dim, const TrainConfig& cfg) {
  cfg.validate();
  const auto in = static_cast<Eigen::Index>(raw_dim);
  const auto out = static_cast<Eigen::Index>(cfg.out_dim == 0 ? raw_dim : cfg.out_dim);
  if (out < 2) throw std::invalid_argument("embedder output dimension must be >= 2");
  ToyEmbedder e;
  if (cfg.init == InitMode::identity) {
    e.W = Eigen::MatrixXd::Identity(out, in);
  } else {
    Rng rng = make_rng(cfg.seed, kStreamTrain, 0xffffffffULL);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    e.W = Eigen::MatrixXd::NullaryExpr(out, in, [&]() { return gauss(rng); });
  }
  return e;
}

EmbeddingMatrix embed(const ToyEmbedder& e, const Eigen::MatrixXd& raw) {
  if (raw.cols() != e.W.cols()) {
    throw std::invalid_argument(fmt::format("embed: raw dimension {} does not match embedder input {}", raw.cols(),
                                            e.W.cols()));
  }
  return normalize_rows(raw * e.W.transpose());
}

EmbeddingMatrix embed(const ToyEmbedder& e, const EmbeddingMatrix& raw) {
  return embed(e, Eigen::MatrixXd(raw.values.cast<double>()));
}

BatchGradient batch_gradient(const ToyEmbedder& e, const Eigen::MatrixXd& raw_rows, const Labels& labels,
                             const MsParams& params) {
  params.validate();
  const Eigen::MatrixXd z = raw_rows * e.W.transpose();
  const Eigen::VectorXd norms = z.rowwise().norm();
  const Eigen::MatrixXd x = norms.cwiseInverse().asDiagonal() * z;

  const PairSelection sel = select_pairs(x, labels, params.effective_epsilon());
  BatchGradient out;
  const Eigen::MatrixXd dx = ms_loss_grad(x, labels, sel, params, &out.loss);
  out.selected_pos = sel.positive_count();
  out.selected_neg = sel.negative_count();

  // d normalize(z) = (I - x x^T) dz / |z|
  const Eigen::VectorXd radial = (dx.cwiseProduct(x)).rowwise().sum();
  const Eigen::MatrixXd dz = norms.cwiseInverse().asDiagonal() * (dx - radial.asDiagonal() * x);
  out.grad_W = dz.transpose() * raw_rows;
  return out;
}

Eigen::MatrixXd gather_batch(const BatchManifest& batch, const RawSources& raw, Labels& labels) {
  labels.clear();
  const Eigen::MatrixXd* first = raw.dense != nullptr ? raw.dense : raw.sparse;
  if (first == nullptr) throw std::invalid_argument("gather_batch: no raw features supplied");
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(batch.image_count()), first->cols());
  Eigen::Index r = 0;
  for (const Place& place : batch.places) {
    const Eigen::MatrixXd* src = place.provenance == Provenance::clique ? raw.dense : raw.sparse;
    if (src == nullptr) {
      throw std::invalid_argument(fmt::format("place {} needs {} raw features that were not supplied", place.label,
                                              place.provenance == Provenance::clique ? "dense" : "sparse"));
    }
    if (src->cols() != rows.cols()) throw std::invalid_argument("gather_batch: dense and sparse raw dims differ");
    for (std::size_t id : place.frame_ids) {
      if (id >= static_cast<std::size_t>(src->rows())) {
        throw std::out_of_range(fmt::format("place {} references frame {} beyond {} rows", place.label, id,
                                            src->rows()));
      }
      rows.row(r++) = src->row(static_cast<Eigen::Index>(id));
      labels.push_back(place.label);
    }
  }
  return rows;
}

TrainResult train_toy_embedder(const RawSources& raw, const std::vector<BatchManifest>& batches,
                               const MsParams& params, const TrainConfig& cfg, const BatchRecompute& recompute) {
  cfg.validate();
  params.validate();
  const Eigen::MatrixXd* first = raw.dense != nullptr ? raw.dense : raw.sparse;
  if (first == nullptr) throw std::invalid_argument("train_toy_embedder: no raw features supplied");

  TrainResult result{init_embedder(static_cast<std::size_t>(first->cols()), cfg), {}};
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(result.embedder.W.rows(), result.embedder.W.cols());
  std::vector<BatchManifest> current;
  const std::vector<BatchManifest>* epoch_batches = &batches;
  std::size_t step = 0;
  Labels labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (epoch > 0 && cfg.recompute_cliques && recompute) {
      current = recompute(epoch, result.embedder);
      epoch_batches = &current;
    }
    std::vector<std::size_t> order(epoch_batches->size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng = make_rng(cfg.seed, kStreamTrain, epoch);
      std::shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t b : order) {
      const Eigen::MatrixXd rows = gather_batch((*epoch_batches)[b], raw, labels);
      const BatchGradient g = batch_gradient(result.embedder, rows, labels, params);
      if (!std::isfinite(g.loss) || !g.grad_W.allFinite()) {
        throw DivergenceError(fmt::format("training diverged at step {} (epoch {}, batch {})", step, epoch, b), step);
      }
      result.trace.push_back(TraceRow{step, g.loss, g.selected_pos, g.selected_neg});
      velocity = cfg.momentum * velocity + g.grad_W;
      result.embedder.W -= cfg.learning_rate * velocity;
      if (!result.embedder.W.allFinite()) {
        throw DivergenceError(fmt::format("weights became non-finite at step {} (epoch {}, batch {})", step, epoch, b),
                              step);
      }
      ++step;
    }
  }
  return result;
}

namespace {

constexpr char kEmbedderMagic[4] = {'G', 'T', 'O', 'Y'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DatasetError(path.string() + ": truncated embedder file");
  return v;
}

}  // namespace

void save_embedder(const ToyEmbedder& e, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open embedder file for writing: " + path.string());
  out.write(kEmbedderMagic, 4);
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(e.W.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(e.W.cols()));
  for (Eigen::Index r = 0; r < e.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.W.cols(); ++c) put<double>(out, e.W(r, c));
  }
  if (!out) throw std::runtime_error("failed writing embedder file: " + path.string());
}

ToyEmbedder load_embedder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open embedder file: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEmbedderMagic, 4) != 0) {
    throw DatasetError(path.string() + ": not an embedder file");
  }
  if (take<std::uint32_t>(in, path) != 1) throw DatasetError(path.string() + ": unsupported embedder version");
  const auto rows = take<std::uint64_t>(in, path);
  const auto cols = take<std::uint64_t>(in, path);
  ToyEmbedder e;
  e.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < e.W.rows(); ++r) {
    for (Eigen::Index c = 0; c < e.W.cols(); ++c) e.W(r, c) = take<double>(in, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DatasetError(path.string() + ": trailing bytes");
  if (!e.W.allFinite()) throw DatasetError(path.string() + ": non-finite weights");
  return e;
}

}  // namespace cliquemining
