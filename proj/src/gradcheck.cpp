#include "adacon/gradcheck.hpp"

#include <algorithm>
#include <vector>

#include "adacon/ecdf.hpp"

namespace adacon {

GradCheckReport finite_difference_check(const std::function<double(const Eigen::MatrixXd&)>& value_fn,
                                        const Eigen::MatrixXd& point, const Eigen::MatrixXd& analytic,
                                        double step) {
  if (!(step > 0.0)) throw Error("step must be positive");
  if (analytic.rows() != point.rows() || analytic.cols() != point.cols()) throw Error("dimension mismatch");

  GradCheckReport report;
  Eigen::MatrixXd x = point;
  double worst_diff = -1.0, max_analytic = 0.0, max_numeric = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double saved = x.data()[k];
    x.data()[k] = saved + step;
    const double up = value_fn(x);
    x.data()[k] = saved - step;
    const double down = value_fn(x);
    x.data()[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) throw Error("loss not differentiable here");

    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.data()[k];
    const double diff = std::abs(a - numeric);
    report.max_coordinate_rel_error =
        std::max(report.max_coordinate_rel_error, diff / std::max(1e-12, std::abs(a) + std::abs(numeric)));
    max_analytic = std::max(max_analytic, std::abs(a));
    max_numeric = std::max(max_numeric, std::abs(numeric));
    if (diff > worst_diff) {
      worst_diff = diff;
      report.worst_index = k;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  if (worst_diff > 0.0) report.max_rel_error = worst_diff / std::max(1e-12, max_analytic + max_numeric);
  return report;
}

namespace {

Eigen::MatrixXd random_unit_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
    m.row(r).normalize();
  }
  return m;
}

Eigen::Index uniform_index(std::mt19937_64& rng, Eigen::Index lo, Eigen::Index hi) {
  return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng);
}

/// Labels drawn from a small pool so that most anchors have positives.
EmbeddingBatch<double> random_contrastive_batch(std::mt19937_64& rng, const GradCheckInstanceOptions& opt) {
  const Eigen::Index b = uniform_index(rng, 2, std::max<Eigen::Index>(2, opt.max_batch));
  const Eigen::Index d = uniform_index(rng, 2, std::max<Eigen::Index>(2, opt.max_dim));
  const Eigen::Index pool = std::max<Eigen::Index>(1, b / 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> values(static_cast<std::size_t>(pool));
  for (double& v : values) v = unif(rng);

  EmbeddingBatch<double> batch;
  batch.embeddings = random_unit_rows(b, d, rng);
  batch.labels.resize(b);
  batch.source_ids.resize(static_cast<std::size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::Index k = uniform_index(rng, 0, pool - 1);
    batch.labels[i] = values[static_cast<std::size_t>(k)];
    batch.source_ids[static_cast<std::size_t>(i)] = k;
  }
  return batch;
}

EcdfTable random_table_covering(const Eigen::VectorXd& labels, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> train(labels.data(), labels.data() + labels.size());
  for (int k = 0; k < 20; ++k) train.push_back(unif(rng));
  return EcdfTable::fit(train);
}

GradCheckReport check_contrastive(LossKind kind, std::mt19937_64& rng, const GradCheckInstanceOptions& opt,
                                  double step) {
  EmbeddingBatch<double> batch = random_contrastive_batch(rng, opt);
  const Temperature temp(opt.temperature);
  Eigen::MatrixXd margins = Eigen::MatrixXd::Zero(batch.size(), batch.size());
  if (kind == LossKind::AdaCon) margins = margin_matrix(random_table_covering(batch.labels, rng), batch.labels).values;

  auto evaluate = [&](const Eigen::MatrixXd& z) {
    EmbeddingBatch<double> probe = batch;
    probe.embeddings = z;
    switch (kind) {
      case LossKind::AdaCon: return adacon_loss<double>(probe, margins, temp);
      case LossKind::SupCon: return supcon_loss<double>(probe, temp);
      default: return npair_loss<double>(probe);
    }
  };
  const LossResult<double> base = evaluate(batch.embeddings);
  return finite_difference_check([&](const Eigen::MatrixXd& z) { return evaluate(z).value; }, batch.embeddings,
                                 base.grad, step);
}

GradCheckReport check_triplet(std::mt19937_64& rng, const GradCheckInstanceOptions& opt, double step) {
  const Eigen::Index t = uniform_index(rng, 1, std::max<Eigen::Index>(1, opt.max_batch));
  const Eigen::Index d = uniform_index(rng, 2, std::max<Eigen::Index>(2, opt.max_dim));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::MatrixXd a, p, n;
  Eigen::VectorXd margins(t);
  TripletBatch<double> trip;
  trip.anchor_labels.resize(t);
  trip.negative_labels.resize(t);
  for (Eigen::Index k = 0; k < t; ++k) {
    trip.anchor_labels[k] = unif(rng);
    trip.negative_labels[k] = unif(rng);
  }
  std::vector<double> train(trip.anchor_labels.data(), trip.anchor_labels.data() + t);
  train.insert(train.end(), trip.negative_labels.data(), trip.negative_labels.data() + t);
  const EcdfTable table = EcdfTable::fit(train);
  for (Eigen::Index k = 0; k < t; ++k) {
    margins[k] = 2.0 * std::abs(table.transform(trip.anchor_labels[k]) - table.transform(trip.negative_labels[k]));
  }

  if (opt.inactive_hinge) {
    // p = a and n = -a: |a-p|^2 - |a-n|^2 = -4, below any margin in [0, 2].
    a = random_unit_rows(t, d, rng);
    p = a;
    n = -a;
  } else {
    // Keep every hinge at least 1e-3 away from its kink.
    a = random_unit_rows(t, d, rng);
    p = random_unit_rows(t, d, rng);
    n = random_unit_rows(t, d, rng);
    for (Eigen::Index k = 0; k < t; ++k) {
      while (std::abs((a.row(k) - p.row(k)).squaredNorm() - (a.row(k) - n.row(k)).squaredNorm() + margins[k]) <
             1e-3) {
        n.row(k) = random_unit_rows(1, d, rng);
      }
    }
  }

  Eigen::MatrixXd stacked(3 * t, d);
  stacked << a, p, n;
  auto evaluate = [&](const Eigen::MatrixXd& s) {
    return triplet_hinge_loss<double>(s.topRows(t), s.middleRows(t, t), s.bottomRows(t), margins);
  };
  trip.anchors = a;
  trip.positives = p;
  trip.negatives = n;
  const LossResult<double> base = adaptive_triplet_loss<double>(trip, table);
  return finite_difference_check([&](const Eigen::MatrixXd& s) { return evaluate(s).value; }, stacked, base.grad,
                                 step);
}

GradCheckReport check_regression(LossKind kind, std::mt19937_64& rng, const GradCheckInstanceOptions& opt,
                                 double step) {
  const Eigen::Index b = uniform_index(rng, 1, std::max<Eigen::Index>(1, opt.max_batch));
  std::normal_distribution<double> normal(0.0, 0.2);
  const RegressionLoss loss{to_regression_kind(kind), opt.huber_delta};
  Eigen::VectorXd pred(b), target(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    target[i] = normal(rng);
    // Residuals stay clear of the L1 kink at 0 and the Huber switch at |r| = delta.
    double r = 0.0;
    do {
      r = normal(rng);
    } while (std::abs(r) < 1e-3 || std::abs(std::abs(r) - opt.huber_delta) < 1e-3);
    pred[i] = target[i] + r;
  }
  const LossResult<double> base = regression_loss<double>(loss, pred, target);
  return finite_difference_check(
      [&](const Eigen::MatrixXd& p) { return regression_loss<double>(loss, Eigen::VectorXd(p.col(0)), target).value; },
      Eigen::MatrixXd(pred), base.grad, step);
}

}  // namespace

GradCheckReport gradcheck_random_instance(LossKind kind, std::mt19937_64& rng, const GradCheckInstanceOptions& options,
                                          double step) {
  switch (kind) {
    case LossKind::AdaCon:
    case LossKind::SupCon:
    case LossKind::NPair:
      return check_contrastive(kind, rng, options, step);
    case LossKind::Triplet:
      return check_triplet(rng, options, step);
    case LossKind::L1:
    case LossKind::MSE:
    case LossKind::Huber:
      return check_regression(kind, rng, options, step);
    case LossKind::None:
      break;
  }
  throw Error("no gradient to check for loss 'none'");
}

GradCheckReport gradcheck_trials(LossKind kind, int trials, std::uint64_t seed, const GradCheckInstanceOptions& options,
                                 double step) {
  std::mt19937_64 rng(seed);
  GradCheckReport worst;
  double coordinate = 0.0;
  for (int k = 0; k < trials; ++k) {
    const GradCheckReport r = gradcheck_random_instance(kind, rng, options, step);
    coordinate = std::max(coordinate, r.max_coordinate_rel_error);
    if (worst.worst_index < 0 || r.max_rel_error > worst.max_rel_error) worst = r;
  }
  worst.max_coordinate_rel_error = coordinate;
  return worst;
}

}  // namespace adacon
