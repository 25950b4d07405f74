#include "adacon/ecdf.hpp"

#include <algorithm>
#include <cmath>

#include "adacon/error.hpp"

namespace adacon {

EcdfTable EcdfTable::fit(std::span<const double> labels) {
  if (labels.empty()) throw Error("empty label set");
  std::vector<double> sorted(labels.begin(), labels.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw Error("invalid label");
  }
  std::sort(sorted.begin(), sorted.end());
  return EcdfTable(std::move(sorted));
}

std::size_t EcdfTable::count_at_most(double y) const {
  if (!std::isfinite(y)) throw Error("invalid label");
  return static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), y) - sorted_.begin());
}

double EcdfTable::transform(double y) const {
  return static_cast<double>(count_at_most(y)) / static_cast<double>(sorted_.size());
}

MarginMatrix margin_matrix(const EcdfTable& table, const Eigen::VectorXd& batch_labels) {
  const Eigen::Index b = batch_labels.size();
  if (b < 1) throw Error("empty label set");

  // Integer counts keep 2|c_i - c_j| / n exact; equal labels give equal counts.
  std::vector<std::ptrdiff_t> counts(static_cast<std::size_t>(b));
  for (Eigen::Index i = 0; i < b; ++i) {
    counts[static_cast<std::size_t>(i)] = static_cast<std::ptrdiff_t>(table.count_at_most(batch_labels[i]));
  }
  const double n = static_cast<double>(table.size());

  MarginMatrix out;
  out.batch_labels = batch_labels;
  out.values.setZero(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = i + 1; j < b; ++j) {
      const auto diff = std::abs(counts[static_cast<std::size_t>(i)] - counts[static_cast<std::size_t>(j)]);
      const double d = 2.0 * static_cast<double>(diff) / n;
      out.values(i, j) = d;
      out.values(j, i) = d;
    }
  }
  return out;
}

MarginMatrix zero_margins(const Eigen::VectorXd& batch_labels) {
  MarginMatrix out;
  out.batch_labels = batch_labels;
  out.values.setZero(batch_labels.size(), batch_labels.size());
  return out;
}

}  // namespace adacon
