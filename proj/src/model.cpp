#include "adacon/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "adacon/error.hpp"

namespace adacon {

namespace {

constexpr double kMinNorm = 1e-12;

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& x) {
  switch (a) {
    case Activation::ReLU: return x.cwiseMax(0.0);
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Identity: return x;
  }
  return x;
}

// dL/dpre given dL/dpost, the pre-activation and the activation output.
Eigen::MatrixXd activate_backward(Activation a, const Eigen::MatrixXd& grad, const Eigen::MatrixXd& pre,
                                  const Eigen::MatrixXd& post) {
  switch (a) {
    case Activation::ReLU: return (pre.array() > 0.0).select(grad, 0.0);
    case Activation::Tanh: return (grad.array() * (1.0 - post.array().square())).matrix();
    case Activation::Identity: return grad;
  }
  return grad;
}

Eigen::MatrixXd dense(const DenseLayer& layer, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

void dense_backward(const DenseLayer& layer, const Eigen::MatrixXd& x, const Eigen::MatrixXd& grad_out,
                    DenseLayer& grad_layer, Eigen::MatrixXd* grad_in) {
  grad_layer.weight.noalias() += grad_out.transpose() * x;
  grad_layer.bias.noalias() += grad_out.colwise().sum().transpose();
  if (grad_in != nullptr) *grad_in = grad_out * layer.weight;
}

DenseLayer init_dense(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> unif(-bound, bound);
  DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
  for (Eigen::Index c = 0; c < in; ++c) {
    for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = unif(rng);
  }
  for (Eigen::Index r = 0; r < out; ++r) layer.bias[r] = unif(rng);
  return layer;
}

DenseLayer zeros_like(const DenseLayer& l) {
  return {Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())};
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw Error("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "relu";
}

std::vector<DenseLayer*> ModelParams::layers() {
  std::vector<DenseLayer*> out;
  for (auto& l : encoder) out.push_back(&l);
  out.push_back(&projection_hidden);
  out.push_back(&projection_out);
  out.push_back(&regression);
  return out;
}

std::vector<const DenseLayer*> ModelParams::layers() const {
  std::vector<const DenseLayer*> out;
  for (const auto& l : encoder) out.push_back(&l);
  out.push_back(&projection_hidden);
  out.push_back(&projection_out);
  out.push_back(&regression);
  return out;
}

Eigen::Index ModelParams::parameter_count() const {
  Eigen::Index n = 0;
  for (const DenseLayer* l : layers()) n += l->weight.size() + l->bias.size();
  return n;
}

Eigen::VectorXd ModelParams::flatten() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index at = 0;
  for (const DenseLayer* l : layers()) {
    flat.segment(at, l->weight.size()) = l->weight.reshaped();
    at += l->weight.size();
    flat.segment(at, l->bias.size()) = l->bias;
    at += l->bias.size();
  }
  return flat;
}

void ModelParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw Error("dimension mismatch");
  Eigen::Index at = 0;
  for (DenseLayer* l : layers()) {
    l->weight.reshaped() = flat.segment(at, l->weight.size());
    at += l->weight.size();
    l->bias = flat.segment(at, l->bias.size());
    at += l->bias.size();
  }
}

bool ModelParams::all_finite() const {
  for (const DenseLayer* l : layers()) {
    if (!l->weight.allFinite() || !l->bias.allFinite()) return false;
  }
  return true;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.spec = spec;
  for (const auto& l : encoder) z.encoder.push_back(adacon::zeros_like(l));
  z.projection_hidden = adacon::zeros_like(projection_hidden);
  z.projection_out = adacon::zeros_like(projection_out);
  z.regression = adacon::zeros_like(regression);
  return z;
}

bool ModelParams::operator==(const ModelParams& o) const {
  return spec == o.spec && encoder == o.encoder && projection_hidden == o.projection_hidden &&
         projection_out == o.projection_out && regression == o.regression;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  if (spec.input_dim < 1 || spec.projection_dim < 1) throw Error("zero-width layer");
  for (Eigen::Index w : spec.hidden) {
    if (w < 1) throw Error("zero-width layer");
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.spec = spec;
  Eigen::Index in = spec.input_dim;
  for (Eigen::Index w : spec.hidden) {
    p.encoder.push_back(init_dense(in, w, rng));
    in = w;
  }
  p.projection_hidden = init_dense(in, in, rng);
  p.projection_out = init_dense(in, spec.projection_dim, rng);
  p.regression = init_dense(in, 1, rng);
  return p;
}

namespace {

Eigen::MatrixXd encode(const ModelParams& params, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
  if (inputs.cols() != params.spec.input_dim) throw Error("dimension mismatch: input width");
  if (!inputs.allFinite()) throw Error("non-finite input");
  Eigen::MatrixXd h = inputs;
  for (const DenseLayer& layer : params.encoder) {
    Eigen::MatrixXd pre = dense(layer, h);
    h = activate(params.spec.activation, pre);
    if (cache != nullptr) {
      cache->pre.push_back(std::move(pre));
      cache->post.push_back(h);
    }
  }
  return h;
}

}  // namespace

ForwardOutput forward(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  ForwardOutput out;
  ForwardCache& c = out.cache;
  c.inputs = inputs;
  const Eigen::MatrixXd features = encode(params, inputs, &c);

  c.proj_pre = dense(params.projection_hidden, features);
  c.proj_hidden = c.proj_pre.cwiseMax(0.0);
  c.proj_raw = dense(params.projection_out, c.proj_hidden);
  c.proj_norm = c.proj_raw.rowwise().norm();
  c.embeddings.resize(c.proj_raw.rows(), c.proj_raw.cols());
  for (Eigen::Index i = 0; i < c.proj_raw.rows(); ++i) {
    if (c.proj_norm[i] < kMinNorm) {
      c.embeddings.row(i).setZero();
      c.embeddings(i, 0) = 1.0;
    } else {
      c.embeddings.row(i) = c.proj_raw.row(i) / c.proj_norm[i];
    }
  }
  out.embeddings = c.embeddings;
  out.predictions = dense(params.regression, features).col(0);
  return out;
}

Eigen::VectorXd predict(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  return dense(params.regression, encode(params, inputs, nullptr)).col(0);
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& grad_embeddings,
                     const Eigen::VectorXd& grad_predictions) {
  const Eigen::Index b = cache.inputs.rows();
  const Eigen::MatrixXd& features = cache.post.empty() ? cache.inputs : cache.post.back();
  ModelParams grads = params.zeros_like();
  Eigen::MatrixXd grad_features = Eigen::MatrixXd::Zero(b, features.cols());

  if (grad_embeddings.size() > 0) {
    if (grad_embeddings.rows() != b || grad_embeddings.cols() != params.spec.projection_dim) {
      throw Error("dimension mismatch: embedding gradient");
    }
    // d(v/|v|)/dv = (I - z z^T) / |v|; rows that hit the fallback carry no gradient.
    Eigen::MatrixXd grad_raw(b, grad_embeddings.cols());
    for (Eigen::Index i = 0; i < b; ++i) {
      if (cache.proj_norm[i] < kMinNorm) {
        grad_raw.row(i).setZero();
        continue;
      }
      const auto z = cache.embeddings.row(i);
      const double along = z.dot(grad_embeddings.row(i));
      grad_raw.row(i) = (grad_embeddings.row(i) - along * z) / cache.proj_norm[i];
    }
    Eigen::MatrixXd grad_hidden;
    dense_backward(params.projection_out, cache.proj_hidden, grad_raw, grads.projection_out, &grad_hidden);
    const Eigen::MatrixXd grad_pre = (cache.proj_pre.array() > 0.0).select(grad_hidden, 0.0);
    Eigen::MatrixXd grad_from_proj;
    dense_backward(params.projection_hidden, features, grad_pre, grads.projection_hidden, &grad_from_proj);
    grad_features += grad_from_proj;
  }

  if (grad_predictions.size() > 0) {
    if (grad_predictions.size() != b) throw Error("dimension mismatch: prediction gradient");
    Eigen::MatrixXd grad_from_reg;
    dense_backward(params.regression, features, Eigen::MatrixXd(grad_predictions), grads.regression, &grad_from_reg);
    grad_features += grad_from_reg;
  }

  Eigen::MatrixXd grad = std::move(grad_features);
  for (std::size_t k = params.encoder.size(); k-- > 0;) {
    const Eigen::MatrixXd grad_pre = activate_backward(params.spec.activation, grad, cache.pre[k], cache.post[k]);
    const Eigen::MatrixXd& layer_in = k == 0 ? cache.inputs : cache.post[k - 1];
    dense_backward(params.encoder[k], layer_in, grad_pre, grads.encoder[k], k == 0 ? nullptr : &grad);
  }
  return grads;
}

OptimizerState make_optimizer(const ModelParams& params, SgdSettings settings) {
  return OptimizerState{params.zeros_like(), settings, 0};
}

void sgd_step(ModelParams& params, const ModelParams& grads, OptimizerState& state) {
  if (!grads.all_finite()) throw NumericalError("non-finite gradient; step rejected");
  const SgdSettings& s = state.settings;

  ModelParams next = params;
  ModelParams velocity = state.velocity;
  auto next_layers = next.layers();
  auto vel_layers = velocity.layers();
  const auto grad_layers = grads.layers();
  for (std::size_t k = 0; k < next_layers.size(); ++k) {
    DenseLayer& w = *next_layers[k];
    DenseLayer& v = *vel_layers[k];
    const DenseLayer& g = *grad_layers[k];
    v.weight = s.momentum * v.weight + g.weight + s.weight_decay * w.weight;
    v.bias = s.momentum * v.bias + g.bias;
    w.weight -= s.learning_rate * v.weight;
    w.bias -= s.learning_rate * v.bias;
  }
  if (!next.all_finite()) throw NumericalError("update produced non-finite parameters; step rejected");

  params = std::move(next);
  state.velocity = std::move(velocity);
  ++state.step;
}

void backward_and_step(ModelParams& params, const ForwardCache& cache, const Eigen::MatrixXd& grad_embeddings,
                       const Eigen::VectorXd& grad_predictions, OptimizerState& state) {
  sgd_step(params, backward(params, cache, grad_embeddings, grad_predictions), state);
}

double lr_at(const LrSchedule& schedule, std::int64_t step) {
  double lr = schedule.base;
  for (std::int64_t m : schedule.milestones) {
    if (step >= m) lr *= schedule.factor;
  }
  return lr;
}

}  // namespace adacon
