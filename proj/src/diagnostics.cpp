#include "adacon/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "adacon/error.hpp"

namespace adacon {

MetricsReport regression_metrics(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets) {
  if (predictions.size() != targets.size()) throw Error("dimension mismatch");
  if (targets.size() == 0) throw Error("empty evaluation set");

  const Eigen::VectorXd r = predictions - targets;
  MetricsReport m;
  m.n = targets.size();
  m.mae = r.cwiseAbs().mean();
  const double ss_res = r.squaredNorm();
  m.rmse = std::sqrt(ss_res / static_cast<double>(m.n));
  const double ss_tot = (targets.array() - targets.mean()).square().sum();
  if (ss_tot > 0.0) m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw Error("dimension mismatch");
  if (x.size() < 2) return std::nullopt;
  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  const Eigen::ArrayXd cx = rx.array() - rx.mean();
  const Eigen::ArrayXd cy = ry.array() - ry.mean();
  const double sxx = cx.square().sum();
  const double syy = cy.square().sum();
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return (cx * cy).sum() / std::sqrt(sxx * syy);
}

ScatterDiagnostic pairwise_scatter(const EmbeddingBatch<double>& batch, const EcdfTable& table, Eigen::Index n_pairs,
                                   std::uint64_t seed) {
  const Eigen::Index b = batch.size();
  if (b < 2) throw Error("batch too small");
  if (batch.labels.size() != b) throw Error("dimension mismatch");

  const std::uint64_t total = static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(b - 1) / 2;
  std::vector<std::uint64_t> chosen;
  if (n_pairs < 0 || static_cast<std::uint64_t>(n_pairs) >= total) {
    chosen.resize(total);
    std::iota(chosen.begin(), chosen.end(), std::uint64_t{0});
  } else {
    // Floyd's algorithm: uniform sample of n_pairs distinct pair indices.
    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> seen;
    const auto k = static_cast<std::uint64_t>(n_pairs);
    for (std::uint64_t j = total - k; j < total; ++j) {
      const std::uint64_t t = std::uniform_int_distribution<std::uint64_t>(0, j)(rng);
      const std::uint64_t pick = seen.insert(t).second ? t : (seen.insert(j), j);
      chosen.push_back(pick);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  Eigen::VectorXd phi(b);
  for (Eigen::Index i = 0; i < b; ++i) phi[i] = table.transform(batch.labels[i]);

  ScatterDiagnostic out;
  out.distance.resize(static_cast<Eigen::Index>(chosen.size()));
  out.similarity.resize(static_cast<Eigen::Index>(chosen.size()));
  // Pair index -> (i, j) with i < j, enumerated row by row.
  Eigen::Index row = 0;
  std::uint64_t row_start = 0;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    while (chosen[k] >= row_start + static_cast<std::uint64_t>(b - 1 - row)) {
      row_start += static_cast<std::uint64_t>(b - 1 - row);
      ++row;
    }
    const Eigen::Index j = row + 1 + static_cast<Eigen::Index>(chosen[k] - row_start);
    out.pairs.emplace_back(row, j);
    const auto e = static_cast<Eigen::Index>(k);
    out.distance[e] = std::abs(phi[row] - phi[j]);
    out.similarity[e] = batch.embeddings.row(row).dot(batch.embeddings.row(j));
  }
  out.spearman_rho = spearman(out.distance, out.similarity);
  return out;
}

std::vector<LayoutPoint> angular_layout(const EmbeddingBatch<double>& batch) {
  const Eigen::Index b = batch.size();
  if (b < 2) throw Error("batch too small");
  if (batch.labels.size() != b) throw Error("dimension mismatch");

  const Eigen::MatrixXd gram = batch.embeddings * batch.embeddings.transpose();
  Eigen::Index e1 = 0;
  Eigen::Index e2 = 1;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = i + 1; j < b; ++j) {
      if (gram(i, j) < gram(e1, e2)) {
        e1 = i;
        e2 = j;
      }
    }
  }

  std::vector<LayoutPoint> out;
  out.reserve(static_cast<std::size_t>(b));
  for (Eigen::Index k = 0; k < b; ++k) {
    // arccos(u.v) for unit rows, in a form that stays exact near 0 and pi.
    const auto u = batch.embeddings.row(k).normalized();
    const auto v = batch.embeddings.row(e1).normalized();
    out.push_back({2.0 * std::atan2((u - v).norm(), (u + v).norm()), batch.labels[k]});
  }
  std::stable_sort(out.begin(), out.end(), [](const LayoutPoint& a, const LayoutPoint& b2) { return a.angle < b2.angle; });
  return out;
}

void write_scatter_csv(const std::filesystem::path& path, const ScatterDiagnostic& scatter) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write file: " + path.string());
  os.precision(17);
  os << "distance,similarity\n";
  for (Eigen::Index k = 0; k < scatter.count(); ++k) os << scatter.distance[k] << ',' << scatter.similarity[k] << '\n';
}

void write_layout_csv(const std::filesystem::path& path, const std::vector<LayoutPoint>& layout) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write file: " + path.string());
  os.precision(17);
  os << "angle,label\n";
  for (const LayoutPoint& p : layout) os << p.angle << ',' << p.label << '\n';
}

}  // namespace adacon
