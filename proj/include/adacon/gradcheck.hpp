#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Core>

#include "adacon/error.hpp"
#include "adacon/losses.hpp"

namespace adacon {

struct GradCheckReport {
  /// Normwise: max|a - n| / max(1e-12, max|a| + max|n|).
  double max_rel_error = 0.0;
  /// Largest |a_k - n_k| / max(1e-12, |a_k| + |n_k|). Informational only: on
  /// coordinates many orders below the largest one it measures the
  /// difference quotient's rounding and truncation error, not the gradient.
  double max_coordinate_rel_error = 0.0;
  Eigen::Index worst_index = -1;  // flat (column-major) coordinate with the largest |a - n|
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Coordinate-wise central differences of `value_fn` around `point`, compared
/// against `analytic`.
/// Throws Error("loss not differentiable here") if a perturbed value is non-finite.
GradCheckReport finite_difference_check(const std::function<double(const Eigen::MatrixXd&)>& value_fn,
                                        const Eigen::MatrixXd& point, const Eigen::MatrixXd& analytic,
                                        double step = 1e-6);

/// How random gradient-check instances are drawn.
struct GradCheckInstanceOptions {
  Eigen::Index max_batch = 16;
  Eigen::Index max_dim = 8;
  double temperature = 10.0;
  double huber_delta = 0.05;
  /// Triplets only: draw geometries whose hinge is inactive.
  bool inactive_hinge = false;
};

/// Draw one random instance of `kind` from `rng` and check its gradient.
GradCheckReport gradcheck_random_instance(LossKind kind, std::mt19937_64& rng,
                                          const GradCheckInstanceOptions& options = {}, double step = 1e-6);

/// Run `trials` random instances; returns the worst report.
GradCheckReport gradcheck_trials(LossKind kind, int trials, std::uint64_t seed,
                                 const GradCheckInstanceOptions& options = {}, double step = 1e-6);

}  // namespace adacon
