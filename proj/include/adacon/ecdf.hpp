#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace adacon {

/// Empirical CDF over a fixed set of training labels.
///
/// transform(y) is the fraction of training labels that are <= y. Counting is
/// done on the sorted array with a binary search, so ties share one value and
/// queries outside the fitted range clamp to 0 and 1. Immutable once fitted.
class EcdfTable {
 public:
  /// Throws Error("empty label set") or Error("invalid label").
  static EcdfTable fit(std::span<const double> labels);

  double transform(double y) const;

  /// Number of training labels <= y.
  std::size_t count_at_most(double y) const;

  std::size_t size() const { return sorted_.size(); }
  std::span<const double> sorted_labels() const { return sorted_; }

 private:
  explicit EcdfTable(std::vector<double> sorted) : sorted_(std::move(sorted)) {}
  std::vector<double> sorted_;
};

inline EcdfTable fit_ecdf(std::span<const double> labels) { return EcdfTable::fit(labels); }

inline EcdfTable fit_ecdf(const Eigen::VectorXd& labels) {
  return EcdfTable::fit(std::span<const double>(labels.data(), static_cast<std::size_t>(labels.size())));
}

inline double transform(const EcdfTable& table, double y) { return table.transform(y); }

/// Pairwise adaptive margins 2|phi(y_i) - phi(y_j)| for one batch.
struct MarginMatrix {
  Eigen::MatrixXd values;
  Eigen::VectorXd batch_labels;

  Eigen::Index size() const { return values.rows(); }
};

MarginMatrix margin_matrix(const EcdfTable& table, const Eigen::VectorXd& batch_labels);

/// All-zero margins over the given labels (reduces the margin loss to SupCon).
MarginMatrix zero_margins(const Eigen::VectorXd& batch_labels);

}  // namespace adacon
