#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace adacon {

enum class Activation { ReLU, Tanh, Identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Network shape: MLP encoder, projection head (dense -> ReLU -> dense ->
/// L2 normalize) and a scalar regression head. Both heads read the encoder
/// output; the projection hidden width equals the encoder output width.
struct ModelSpec {
  Eigen::Index input_dim = 16;
  std::vector<Eigen::Index> hidden = {64, 64};
  Eigen::Index projection_dim = 128;
  Activation activation = Activation::ReLU;

  Eigen::Index feature_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
  bool operator==(const ModelSpec&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// Network weights. Also used as the container for parameter gradients and
/// optimizer momentum buffers, which share its shape.
struct ModelParams {
  ModelSpec spec;
  std::vector<DenseLayer> encoder;
  DenseLayer projection_hidden;
  DenseLayer projection_out;
  DenseLayer regression;

  /// Every layer in a fixed order: encoder..., projection_hidden, projection_out, regression.
  std::vector<DenseLayer*> layers();
  std::vector<const DenseLayer*> layers() const;

  Eigen::Index parameter_count() const;
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
  bool all_finite() const;
  ModelParams zeros_like() const;

  bool operator==(const ModelParams& o) const;
};

/// Throws Error("zero-width layer") for a zero width.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Intermediate activations kept for backward().
struct ForwardCache {
  Eigen::MatrixXd inputs;
  std::vector<Eigen::MatrixXd> pre;   // encoder pre-activations
  std::vector<Eigen::MatrixXd> post;  // encoder outputs, post.back() feeds both heads
  Eigen::MatrixXd proj_pre;
  Eigen::MatrixXd proj_hidden;
  Eigen::MatrixXd proj_raw;   // before normalization
  Eigen::VectorXd proj_norm;  // per-row norm of proj_raw
  Eigen::MatrixXd embeddings;
};

struct ForwardOutput {
  Eigen::MatrixXd embeddings;   // B x projection_dim, unit rows
  Eigen::VectorXd predictions;  // B
  ForwardCache cache;
};

/// Rows of `inputs` are samples. Throws on width mismatch or non-finite input.
ForwardOutput forward(const ModelParams& params, const Eigen::MatrixXd& inputs);

/// Regression head only, without keeping a cache.
Eigen::VectorXd predict(const ModelParams& params, const Eigen::MatrixXd& inputs);

/// Parameter gradients for upstream gradients on embeddings (B x d) and
/// predictions (B). Either may be empty (size 0) to mean zero.
ModelParams backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& grad_embeddings,
                     const Eigen::VectorXd& grad_predictions);

struct SgdSettings {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

struct OptimizerState {
  ModelParams velocity;
  SgdSettings settings;
  std::int64_t step = 0;
};

OptimizerState make_optimizer(const ModelParams& params, SgdSettings settings);

/// g <- grad + wd * w (weights only); v <- mu * v + g; w <- w - lr * v.
/// Throws NumericalError and leaves params and state untouched if the
/// gradient or the updated parameters are not finite.
void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state);

void backward_and_step(ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& grad_embeddings,
                       const Eigen::VectorXd& grad_predictions, OptimizerState& state);

struct LrSchedule {
  double base = 1e-2;
  std::vector<std::int64_t> milestones = {3000, 4500};
  double factor = 0.1;
};

/// base * factor^k where k is the number of milestones <= step.
double lr_at(const LrSchedule& schedule, std::int64_t step);

/// Versioned little-endian binary container: magic, spec header, float64 payload.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);
/// Throws Error if the stored spec differs from `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected);

}  // namespace adacon
