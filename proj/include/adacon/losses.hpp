#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adacon/ecdf.hpp"
#include "adacon/error.hpp"

namespace adacon {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// B embeddings (one per row) with their labels and the id of the original
/// sample each row was produced from. Positive and negative index sets are
/// derived from the labels on demand.
template <typename Scalar>
struct EmbeddingBatch {
  Matrix<Scalar> embeddings;
  Vector<Scalar> labels;
  std::vector<std::int64_t> source_ids;

  Eigen::Index size() const { return embeddings.rows(); }
  Eigen::Index dim() const { return embeddings.cols(); }

  /// Rows other than i whose label equals labels[i] (|diff| <= tolerance).
  std::vector<Eigen::Index> positives(Eigen::Index i, Scalar tolerance = Scalar(0)) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < size(); ++j) {
      if (j != i && std::abs(labels[j] - labels[i]) <= tolerance) out.push_back(j);
    }
    return out;
  }

  std::vector<Eigen::Index> negatives(Eigen::Index i, Scalar tolerance = Scalar(0)) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index j = 0; j < size(); ++j) {
      if (std::abs(labels[j] - labels[i]) > tolerance) out.push_back(j);
    }
    return out;
  }

  bool is_unit_norm(Scalar tol = Scalar(1e-6)) const {
    for (Eigen::Index i = 0; i < size(); ++i) {
      if (std::abs(embeddings.row(i).norm() - Scalar(1)) > tol) return false;
    }
    return true;
  }
};

/// Loss value, the per-anchor (or per-element) terms summing to it, and the
/// gradient of the value with respect to the loss inputs.
///
/// For contrastive losses `grad` is B x d (one row per embedding); for the
/// triplet loss it stacks anchors, positives, negatives (3T x d); for the
/// regression losses it is a B x 1 column over predictions.
template <typename Scalar>
struct LossResult {
  Scalar value = Scalar(0);
  Vector<Scalar> per_anchor;
  Matrix<Scalar> grad;
  /// Contrastive softmax losses only: dL/dc for the symmetric similarity
  /// entries c_ij = c_ji = z_i . z_j (B x B, zero diagonal).
  Matrix<Scalar> grad_similarity;
  Eigen::Index skipped_anchors = 0;
};

struct Temperature {
  double s = 10.0;

  Temperature() = default;
  explicit Temperature(double scale) : s(scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error("temperature must be positive");
  }
};

namespace detail {

/// Shared softmax-over-batch loss used by AdaCon, SupCon and N-pair:
///
///   L_i = mean_{p in P(i)} [ logsumexp_{a != i} scale*(c_ia + m_ia) - scale*c_ip ]
///
/// with c = Z Z^T. The gradient is accumulated as dL/dc in a B x B matrix G and
/// mapped back through the Gram product: dL/dZ = (G + G^T) Z.
template <typename Scalar, typename PositiveFn>
LossResult<Scalar> softmax_contrastive(const Matrix<Scalar>& z, const Matrix<Scalar>& margins, Scalar scale,
                                       PositiveFn&& positives_of) {
  const Eigen::Index b = z.rows();
  if (b < 2) throw Error("batch too small");
  if (margins.rows() != b || margins.cols() != b) throw Error("dimension mismatch");

  const Matrix<Scalar> gram = z * z.transpose();
  Matrix<Scalar> g = Matrix<Scalar>::Zero(b, b);
  Vector<Scalar> logits(b);

  LossResult<Scalar> out;
  out.per_anchor = Vector<Scalar>::Zero(b);

  for (Eigen::Index i = 0; i < b; ++i) {
    const std::vector<Eigen::Index> pos = positives_of(i);
    if (pos.empty()) {
      ++out.skipped_anchors;
      continue;
    }

    Scalar shift = -std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index a = 0; a < b; ++a) {
      if (a == i) continue;
      logits[a] = scale * (gram(i, a) + margins(i, a));
      shift = std::max(shift, logits[a]);
    }
    Scalar denom = 0;
    for (Eigen::Index a = 0; a < b; ++a) {
      if (a == i) continue;
      logits[a] = std::exp(logits[a] - shift);
      denom += logits[a];
    }
    const Scalar lse = shift + std::log(denom);

    const Scalar inv_p = Scalar(1) / static_cast<Scalar>(pos.size());
    Scalar term = 0;
    for (Eigen::Index p : pos) term += lse - scale * gram(i, p);
    out.per_anchor[i] = term * inv_p;

    for (Eigen::Index a = 0; a < b; ++a) {
      if (a != i) g(i, a) += scale * logits[a] / denom;
    }
    for (Eigen::Index p : pos) g(i, p) -= scale * inv_p;
  }

  out.value = out.per_anchor.sum();
  out.grad_similarity = g + g.transpose();
  out.grad = out.grad_similarity * z;
  return out;
}

}  // namespace detail

/// Adaptive-margin supervised contrastive loss. Every anchor with at least one
/// positive contributes; anchors without positives add zero and are counted in
/// `skipped_anchors`.
template <typename Scalar>
LossResult<Scalar> adacon_loss(const EmbeddingBatch<Scalar>& batch, const Matrix<Scalar>& margins, Temperature temp,
                               Scalar label_tolerance = Scalar(0)) {
  if (batch.labels.size() != batch.size()) throw Error("dimension mismatch");
  return detail::softmax_contrastive<Scalar>(batch.embeddings, margins, static_cast<Scalar>(temp.s),
                                             [&](Eigen::Index i) { return batch.positives(i, label_tolerance); });
}

template <typename Scalar>
LossResult<Scalar> adacon_loss(const EmbeddingBatch<Scalar>& batch, const MarginMatrix& margins, Temperature temp,
                               Scalar label_tolerance = Scalar(0)) {
  return adacon_loss<Scalar>(batch, margins.values.cast<Scalar>().eval(), temp, label_tolerance);
}

/// Supervised contrastive loss treating each distinct label as a class.
template <typename Scalar>
LossResult<Scalar> supcon_loss(const EmbeddingBatch<Scalar>& batch, Temperature temp,
                               Scalar label_tolerance = Scalar(0)) {
  const Matrix<Scalar> zero = Matrix<Scalar>::Zero(batch.size(), batch.size());
  return adacon_loss<Scalar>(batch, zero, temp, label_tolerance);
}

/// The designated N-pair positive of anchor i: the first other row sharing its
/// source id, else the first other row sharing its label, else -1.
template <typename Scalar>
Eigen::Index npair_positive(const EmbeddingBatch<Scalar>& batch, Eigen::Index i) {
  const bool have_ids = static_cast<Eigen::Index>(batch.source_ids.size()) == batch.size();
  if (have_ids) {
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
      if (j != i && batch.source_ids[j] == batch.source_ids[i]) return j;
    }
  }
  for (Eigen::Index j = 0; j < batch.size(); ++j) {
    if (j != i && batch.labels[j] == batch.labels[i]) return j;
  }
  return -1;
}

/// Multi-class N-pair loss: one positive per anchor, every other row in the
/// denominator, no temperature.
template <typename Scalar>
LossResult<Scalar> npair_loss(const EmbeddingBatch<Scalar>& batch) {
  if (batch.labels.size() != batch.size()) throw Error("dimension mismatch");
  const Matrix<Scalar> zero = Matrix<Scalar>::Zero(batch.size(), batch.size());
  return detail::softmax_contrastive<Scalar>(batch.embeddings, zero, Scalar(1), [&](Eigen::Index i) {
    const Eigen::Index p = npair_positive(batch, i);
    return p < 0 ? std::vector<Eigen::Index>{} : std::vector<Eigen::Index>{p};
  });
}

/// T triplets of embeddings (rows aligned) plus the labels that set each margin.
template <typename Scalar>
struct TripletBatch {
  Matrix<Scalar> anchors;
  Matrix<Scalar> positives;
  Matrix<Scalar> negatives;
  Vector<Scalar> anchor_labels;
  Vector<Scalar> negative_labels;

  Eigen::Index size() const { return anchors.rows(); }
};

/// Hinge triplet loss with explicit per-triplet margins:
///   sum_t max(0, |a-p|^2 - |a-n|^2 + m_t)
/// Subgradient is zero on the inactive side of the hinge.
template <typename Scalar>
LossResult<Scalar> triplet_hinge_loss(const Matrix<Scalar>& anchors, const Matrix<Scalar>& positives,
                                      const Matrix<Scalar>& negatives, const Vector<Scalar>& margins) {
  const Eigen::Index t = anchors.rows();
  const Eigen::Index d = anchors.cols();
  if (positives.rows() != t || negatives.rows() != t || margins.size() != t || positives.cols() != d ||
      negatives.cols() != d) {
    throw Error("dimension mismatch");
  }

  LossResult<Scalar> out;
  out.per_anchor = Vector<Scalar>::Zero(t);
  out.grad = Matrix<Scalar>::Zero(3 * t, d);
  for (Eigen::Index k = 0; k < t; ++k) {
    const auto ap = (anchors.row(k) - positives.row(k)).eval();
    const auto an = (anchors.row(k) - negatives.row(k)).eval();
    const Scalar h = ap.squaredNorm() - an.squaredNorm() + margins[k];
    if (h <= Scalar(0)) continue;
    out.per_anchor[k] = h;
    out.grad.row(k) = Scalar(2) * (negatives.row(k) - positives.row(k));
    out.grad.row(t + k) = Scalar(-2) * ap;
    out.grad.row(2 * t + k) = Scalar(2) * an;
  }
  out.value = out.per_anchor.sum();
  return out;
}

struct TripletOptions {
  /// Reject embeddings whose norms stray from 1 by more than 1e-6.
  bool require_normalized = true;
};

/// Adaptive triplet loss with margin 2|phi(y_anchor) - phi(y_negative)|.
template <typename Scalar>
LossResult<Scalar> adaptive_triplet_loss(const TripletBatch<Scalar>& triplets, const EcdfTable& table,
                                         TripletOptions options = {}) {
  const Eigen::Index t = triplets.size();
  if (triplets.anchor_labels.size() != t || triplets.negative_labels.size() != t) {
    throw Error("dimension mismatch");
  }
  if (options.require_normalized) {
    for (const Matrix<Scalar>* m : {&triplets.anchors, &triplets.positives, &triplets.negatives}) {
      for (Eigen::Index r = 0; r < m->rows(); ++r) {
        if (std::abs(m->row(r).norm() - Scalar(1)) > Scalar(1e-6)) throw Error("embeddings not normalized");
      }
    }
  }
  Vector<Scalar> margins(t);
  for (Eigen::Index k = 0; k < t; ++k) {
    const double pa = table.transform(static_cast<double>(triplets.anchor_labels[k]));
    const double pn = table.transform(static_cast<double>(triplets.negative_labels[k]));
    margins[k] = static_cast<Scalar>(2.0 * std::abs(pa - pn));
  }
  return triplet_hinge_loss<Scalar>(triplets.anchors, triplets.positives, triplets.negatives, margins);
}

enum class RegressionKind { L1, MSE, Huber };

struct RegressionLoss {
  RegressionKind kind = RegressionKind::L1;
  double delta = 0.05;  // Huber transition point
};

/// Mean-reduced L1 / MSE / Huber loss. `grad` is the B x 1 gradient with
/// respect to the predictions; `per_anchor` holds each element's share of the mean.
template <typename Scalar>
LossResult<Scalar> regression_loss(RegressionLoss loss, const Vector<Scalar>& predictions,
                                   const Vector<Scalar>& targets) {
  const Eigen::Index b = predictions.size();
  if (targets.size() != b) throw Error("dimension mismatch");
  if (b < 1) throw Error("empty batch");
  if (loss.kind == RegressionKind::Huber && !(loss.delta > 0.0)) throw Error("huber delta must be positive");

  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  const Scalar delta = static_cast<Scalar>(loss.delta);
  LossResult<Scalar> out;
  out.per_anchor.resize(b);
  out.grad.resize(b, 1);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Scalar r = predictions[i] - targets[i];
    const Scalar sign = r > 0 ? Scalar(1) : (r < 0 ? Scalar(-1) : Scalar(0));
    Scalar v = 0;
    Scalar g = 0;
    switch (loss.kind) {
      case RegressionKind::L1:
        v = std::abs(r);
        g = sign;
        break;
      case RegressionKind::MSE:
        v = r * r;
        g = Scalar(2) * r;
        break;
      case RegressionKind::Huber:
        if (std::abs(r) <= delta) {
          v = Scalar(0.5) * r * r;
          g = r;
        } else {
          v = delta * (std::abs(r) - Scalar(0.5) * delta);
          g = delta * sign;
        }
        break;
    }
    out.per_anchor[i] = v * inv_b;
    out.grad(i, 0) = g * inv_b;
  }
  out.value = out.per_anchor.sum();
  return out;
}

enum class LossKind { AdaCon, SupCon, NPair, Triplet, L1, MSE, Huber, None };

LossKind parse_loss_kind(std::string_view name);
std::string to_string(LossKind kind);
bool is_contrastive(LossKind kind);
bool is_regression(LossKind kind);
RegressionKind to_regression_kind(LossKind kind);

}  // namespace adacon
