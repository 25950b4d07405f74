#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "adacon/ecdf.hpp"
#include "adacon/losses.hpp"

namespace adacon {

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;  // empty when the targets have zero variance
  Eigen::Index n = 0;

  bool operator==(const MetricsReport&) const = default;
};

/// MAE, RMSE and R^2 = 1 - SS_res / SS_tot. R^2 may be negative.
MetricsReport regression_metrics(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets);

/// Spearman rank correlation with average ranks for ties; empty if either
/// coordinate is constant.
std::optional<double> spearman(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Average (1-based) ranks; tied values share the mean of their positions.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& x);

struct ScatterDiagnostic {
  Eigen::VectorXd distance;    // |phi(y_i) - phi(y_j)|
  Eigen::VectorXd similarity;  // z_i . z_j
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  std::optional<double> spearman_rho;

  Eigen::Index count() const { return distance.size(); }
};

/// Samples `n_pairs` distinct unordered pairs uniformly without replacement
/// (all pairs when fewer exist) and correlates ECDF label distance with
/// cosine similarity.
ScatterDiagnostic pairwise_scatter(const EmbeddingBatch<double>& batch, const EcdfTable& table,
                                   Eigen::Index n_pairs = 2000, std::uint64_t seed = 0);

struct LayoutPoint {
  double angle = 0.0;  // radians
  double label = 0.0;
};

/// Angular layout: the least-similar pair are the endpoints; the first sits at
/// angle 0 and every sample is placed at arccos of its similarity to it.
/// Sorted by angle.
std::vector<LayoutPoint> angular_layout(const EmbeddingBatch<double>& batch);

void write_scatter_csv(const std::filesystem::path& path, const ScatterDiagnostic& scatter);
void write_layout_csv(const std::filesystem::path& path, const std::vector<LayoutPoint>& layout);

}  // namespace adacon
