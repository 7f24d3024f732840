#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cliquemining/dataset.hpp"

namespace cliquemining {

/// Multi-Similarity loss parameters plus the online mining margin. With
/// `mining` off every positive and negative of an eligible anchor is used,
/// which is the same as an infinite margin.
struct MsParams {
  double alpha = 1.0;
  double beta = 50.0;
  double lambda = 0.5;
  double epsilon = 0.1;
  bool mining = true;

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("MsParams: alpha must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("MsParams: beta must be > 0");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("MsParams: epsilon must be >= 0");
    if (!std::isfinite(lambda)) throw std::invalid_argument("MsParams: lambda must be finite");
  }
  [[nodiscard]] double effective_epsilon() const {
    return mining ? epsilon : std::numeric_limits<double>::infinity();
  }
};

using Labels = std::vector<std::size_t>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Row i holds anchor i's selected partners.
struct PairSelection {
  BoolMatrix positives;
  BoolMatrix negatives;

  [[nodiscard]] std::size_t positive_count() const { return static_cast<std::size_t>(positives.count()); }
  [[nodiscard]] std::size_t negative_count() const { return static_cast<std::size_t>(negatives.count()); }
};

namespace detail {

inline void check_labels(Eigen::Index rows, const Labels& labels) {
  if (static_cast<std::size_t>(rows) != labels.size()) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) + " does not match " +
                                std::to_string(rows) + " embedding rows");
  }
}

inline void check_normalized(const EmbeddingMatrix& e) {
  if (!e.normalized) throw std::invalid_argument("MS loss needs unit-norm embeddings (normalized flag not set)");
}

}  // namespace detail

/// Hardest-pair mining. Negative j of anchor i is kept when its distance is
/// below the farthest positive plus epsilon; positive j is kept when its
/// distance is above the nearest negative minus epsilon. An empty positive set
/// has max -inf, an empty negative set has min +inf.
template <typename Derived>
PairSelection select_pairs(const Eigen::MatrixBase<Derived>& x, const Labels& labels, double epsilon) {
  detail::check_labels(x.rows(), labels);
  if (!(epsilon >= 0.0)) throw std::invalid_argument("select_pairs: epsilon must be >= 0");
  const Eigen::Index b = x.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();

  Eigen::MatrixXd dist(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < b; ++j) dist(i, j) = dist(j, i) = desc_distance(x.row(i), x.row(j));
  }

  PairSelection sel{BoolMatrix::Constant(b, b, false), BoolMatrix::Constant(b, b, false)};
  for (Eigen::Index i = 0; i < b; ++i) {
    double hardest_pos = -inf;
    double hardest_neg = inf;
    bool any_pos = false;
    bool any_neg = false;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      if (labels[i] == labels[j]) {
        any_pos = true;
        hardest_pos = std::max(hardest_pos, dist(i, j));
      } else {
        any_neg = true;
        hardest_neg = std::min(hardest_neg, dist(i, j));
      }
    }
    if (!any_pos || !any_neg) continue;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j == i) continue;
      if (labels[i] == labels[j]) {
        sel.positives(i, j) = dist(i, j) > hardest_neg - epsilon;
      } else {
        sel.negatives(i, j) = dist(i, j) < hardest_pos + epsilon;
      }
    }
  }
  return sel;
}

/// dL/dS for a fixed selection; also returns the loss.
template <typename Derived>
Eigen::MatrixXd ms_similarity_grad(const Eigen::MatrixBase<Derived>& x, const PairSelection& sel,
                                   const MsParams& p, double* loss_out) {
  const Eigen::Index b = x.rows();
  const Eigen::MatrixXd xs = x.template cast<double>();
  const Eigen::MatrixXd s = xs * xs.transpose();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(b, b);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    double pos_sum = 0.0;
    double neg_sum = 0.0;
    for (Eigen::Index k = 0; k < b; ++k) {
      if (sel.positives(i, k)) {
        g(i, k) = -std::exp(-p.alpha * (s(i, k) - p.lambda));
        pos_sum -= g(i, k);
      } else if (sel.negatives(i, k)) {
        g(i, k) = std::exp(p.beta * (s(i, k) - p.lambda));
        neg_sum += g(i, k);
      }
    }
    loss += std::log1p(pos_sum) / p.alpha + std::log1p(neg_sum) / p.beta;
    for (Eigen::Index k = 0; k < b; ++k) {
      if (sel.positives(i, k)) g(i, k) /= 1.0 + pos_sum;
      else if (sel.negatives(i, k)) g(i, k) /= 1.0 + neg_sum;
    }
  }
  if (loss_out != nullptr) *loss_out = b > 0 ? loss / static_cast<double>(b) : 0.0;
  if (b > 0) g /= static_cast<double>(b);
  return g;
}

template <typename Derived>
double ms_loss(const Eigen::MatrixBase<Derived>& x, const Labels& labels, const PairSelection& sel,
               const MsParams& p) {
  detail::check_labels(x.rows(), labels);
  double loss = 0.0;
  ms_similarity_grad(x, sel, p, &loss);
  return loss;
}

/// Loss with selection recomputed from x. Rows are assumed unit-norm.
template <typename Derived>
double ms_loss(const Eigen::MatrixBase<Derived>& x, const Labels& labels, const MsParams& p) {
  p.validate();
  return ms_loss(x, labels, select_pairs(x, labels, p.effective_epsilon()), p);
}

/// dL/dx with the selection held constant: x's rows appear both as anchors
/// and as partners, so the gradient is G x + G^T x.
template <typename Derived>
Eigen::MatrixXd ms_loss_grad(const Eigen::MatrixBase<Derived>& x, const Labels& labels, const PairSelection& sel,
                             const MsParams& p, double* loss_out = nullptr) {
  detail::check_labels(x.rows(), labels);
  const Eigen::MatrixXd g = ms_similarity_grad(x, sel, p, loss_out);
  const Eigen::MatrixXd xs = x.template cast<double>();
  return g * xs + g.transpose() * xs;
}

template <typename Derived>
Eigen::MatrixXd ms_loss_grad(const Eigen::MatrixBase<Derived>& x, const Labels& labels, const MsParams& p) {
  p.validate();
  return ms_loss_grad(x, labels, select_pairs(x, labels, p.effective_epsilon()), p);
}

inline PairSelection select_pairs(const EmbeddingMatrix& e, const Labels& labels, double epsilon) {
  return select_pairs(e.values, labels, epsilon);
}

inline double ms_loss(const EmbeddingMatrix& e, const Labels& labels, const MsParams& p) {
  detail::check_normalized(e);
  return ms_loss(e.values, labels, p);
}

inline Eigen::MatrixXd ms_loss_grad(const EmbeddingMatrix& e, const Labels& labels, const MsParams& p) {
  detail::check_normalized(e);
  return ms_loss_grad(e.values, labels, p);
}

}  // namespace cliquemining
