#include "dos/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dos/error.hpp"

namespace dos {

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw Error(ErrorKind::InvalidInput, "model needs at least input and output dims");
  if (std::any_of(dims.begin(), dims.end(), [](std::size_t d) { return d == 0; })) {
    throw Error(ErrorKind::InvalidInput, "model layer dims must be positive");
  }
  if (dims.back() < 2) throw Error(ErrorKind::InvalidInput, "output must hold K >= 1 classes plus the absent class");
}

Matrix affine(const Matrix& x, const Dense& layer) {
  Matrix out = matmul(x, layer.weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  return out;
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

bool finite_block(const Dense& d) { return all_finite(d.weight.data()) && all_finite(d.bias); }

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_dims) : dims_(std::move(layer_dims)) {
  check_dims(dims_);
  layers_.reserve(dims_.size() - 1);
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    layers_.push_back(Dense{Matrix(dims_[i], dims_[i + 1]), std::vector<double>(dims_[i + 1], 0.0)});
  }
}

MlpModel MlpModel::he_uniform(std::vector<std::size_t> layer_dims, Rng& rng) {
  MlpModel model(std::move(layer_dims));
  for (auto& layer : model.layers_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.rows()));
    for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  }
  return model;
}

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

ForwardTrace forward_trace(const MlpModel& model, const Matrix& x) {
  if (x.cols() != model.input_dim()) {
    throw Error(ErrorKind::Shape, "input has " + std::to_string(x.cols()) + " columns, model expects " +
                                      std::to_string(model.input_dim()));
  }
  ForwardTrace trace;
  trace.activations.reserve(model.layers().size());
  trace.activations.push_back(x);
  const auto& layers = model.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    Matrix h = affine(trace.activations.back(), layers[i]);
    relu_inplace(h);
    trace.activations.push_back(std::move(h));
  }
  trace.logits = affine(trace.activations.back(), layers.back());
  return trace;
}

ForwardResult forward(const MlpModel& model, const Matrix& x) {
  ForwardTrace trace = forward_trace(model, x);
  return {std::move(trace.logits), std::move(trace.activations.back())};
}

Gradients zero_gradients(const MlpModel& model) {
  Gradients g;
  for (const auto& layer : model.layers()) {
    g.layers.push_back(Dense{Matrix(layer.weight.rows(), layer.weight.cols()),
                             std::vector<double>(layer.bias.size(), 0.0)});
  }
  return g;
}

double gradient_norm(const Gradients& grads) {
  double ss = 0.0;
  for (const auto& layer : grads.layers) {
    for (double v : layer.weight.data()) ss += v * v;
    for (double v : layer.bias) ss += v * v;
  }
  return std::sqrt(ss);
}

double clip_gradients(Gradients& grads, double max_norm) {
  const double norm = gradient_norm(grads);
  if (max_norm > 0.0 && norm > max_norm && std::isfinite(norm)) {
    const double scale = max_norm / norm;
    for (auto& layer : grads.layers) {
      for (double& v : layer.weight.data()) v *= scale;
      for (double& v : layer.bias) v *= scale;
    }
  }
  return norm;
}

Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& logit_grad) {
  const auto& layers = model.layers();
  if (trace.empty()) throw Error(ErrorKind::State, "backward called without a forward trace");
  if (trace.activations.size() != layers.size()) {
    throw Error(ErrorKind::State, "forward trace depth does not match model");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (trace.activations[i].cols() != layers[i].weight.rows()) {
      throw Error(ErrorKind::State, "forward trace widths do not match model");
    }
  }
  const std::size_t batch = trace.activations.front().rows();
  if (logit_grad.rows() != batch || logit_grad.cols() != model.output_dim()) {
    throw Error(ErrorKind::Shape, "logit gradient shape does not match forward batch");
  }

  Gradients grads;
  grads.layers.resize(layers.size());
  Matrix delta = logit_grad;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Matrix& input = trace.activations[li];
    auto& g = grads.layers[li];
    g.weight = matmul_tn(input, delta);
    g.bias.assign(delta.cols(), 0.0);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
    }
    if (li == 0) break;
    Matrix upstream = matmul_nt(delta, layers[li].weight);
    // ReLU derivative: zero wherever the unit was inactive.
    const auto act = input.data();
    auto up = upstream.data();
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (!(act[i] > 0.0)) up[i] = 0.0;
    }
    delta = std::move(upstream);
  }
  return grads;
}

SgdState make_sgd_state(const MlpModel& model, const SgdConfig& config) {
  if (!(config.learning_rate >= 0.0) || !(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw Error(ErrorKind::Config, "sgd requires learning_rate >= 0 and momentum in [0, 1)");
  }
  SgdState state;
  state.config = config;
  state.learning_rate = config.learning_rate;
  state.velocity = zero_gradients(model).layers;
  return state;
}

double lr_at_epoch(const SgdConfig& config, std::size_t epoch) {
  double lr = config.learning_rate;
  for (std::size_t m : config.milestones) {
    if (m <= epoch) lr *= config.decay_factor;
  }
  return lr;
}

void sgd_step(MlpModel& model, const Gradients& grads, SgdState& state) {
  auto& layers = model.layers();
  if (grads.layers.size() != layers.size() || state.velocity.size() != layers.size()) {
    throw Error(ErrorKind::Shape, "gradient blocks do not match model layers");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g.weight.rows() != layers[i].weight.rows() || g.weight.cols() != layers[i].weight.cols() ||
        g.bias.size() != layers[i].bias.size()) {
      throw Error(ErrorKind::Shape, "gradient block " + std::to_string(i) + " shape mismatch");
    }
    if (!finite_block(g)) {
      throw Error(ErrorKind::Divergence, "non-finite gradient in layer " + std::to_string(i));
    }
  }

  const double mu = state.config.momentum;
  const double wd = state.config.weight_decay;
  const double lr = state.learning_rate;
  auto update = [&](std::span<double> param, std::span<const double> grad, std::span<double> vel) {
    for (std::size_t j = 0; j < param.size(); ++j) {
      vel[j] = mu * vel[j] + grad[j] + wd * param[j];
      param[j] -= lr * vel[j];
    }
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight.data(), grads.layers[i].weight.data(), state.velocity[i].weight.data());
    update(layers[i].bias, grads.layers[i].bias, state.velocity[i].bias);
  }
  for (const auto& layer : layers) {
    if (!finite_block(layer)) throw Error(ErrorKind::Divergence, "parameters became non-finite");
  }
}

}  // namespace dos
