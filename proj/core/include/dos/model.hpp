#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dos/numeric.hpp"

namespace dos {

// Fully connected layer: y = x * weight + bias, weight stored (fan_in x fan_out).
struct Dense {
  Matrix weight;
  std::vector<double> bias;

  friend bool operator==(const Dense&, const Dense&) = default;
};

// Multilayer perceptron with ReLU hidden layers and a linear output head of
// K+1 logits; the last logit is the absent (outlier) category.
class MlpModel {
 public:
  MlpModel() = default;
  // All parameters zero. layer_dims = {input, hidden..., K+1}, at least two entries.
  explicit MlpModel(std::vector<std::size_t> layer_dims);

  // He-uniform fan-in initialization: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
  static MlpModel he_uniform(std::vector<std::size_t> layer_dims, Rng& rng);

  const std::vector<std::size_t>& layer_dims() const noexcept { return dims_; }
  std::size_t input_dim() const noexcept { return dims_.front(); }
  std::size_t output_dim() const noexcept { return dims_.back(); }
  // Number of ID classes K (output_dim - 1).
  std::size_t num_classes() const noexcept { return dims_.back() - 1; }
  std::size_t penultimate_dim() const noexcept { return dims_[dims_.size() - 2]; }
  std::size_t parameter_count() const noexcept;

  std::vector<Dense>& layers() noexcept { return layers_; }
  const std::vector<Dense>& layers() const noexcept { return layers_; }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::vector<Dense> layers_;
};

struct ForwardResult {
  Matrix logits;
  // Activations feeding the output layer (the input itself for a single-layer model).
  Matrix penultimate;
};

// Cached activations for backward(). activations[0] is the input and
// activations[i] the post-ReLU output of layer i-1.
struct ForwardTrace {
  std::vector<Matrix> activations;
  Matrix logits;

  bool empty() const noexcept { return activations.empty(); }
  const Matrix& penultimate() const { return activations.back(); }
};

ForwardResult forward(const MlpModel& model, const Matrix& x);
ForwardTrace forward_trace(const MlpModel& model, const Matrix& x);

// Gradient blocks mirroring MlpModel::layers().
struct Gradients {
  std::vector<Dense> layers;
};

Gradients zero_gradients(const MlpModel& model);

// Global L2 norm over all gradient blocks.
double gradient_norm(const Gradients& grads);
// Rescales grads so their global norm is at most max_norm; returns the norm
// before clipping. max_norm <= 0 disables clipping.
double clip_gradients(Gradients& grads, double max_norm);

// Backpropagates dL/dlogits through the cached trace. Throws ErrorKind::State
// when the trace is empty or does not belong to a model of this shape.
Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& logit_grad);

struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> milestones{75, 90};
  double decay_factor = 0.1;

  friend bool operator==(const SgdConfig&, const SgdConfig&) = default;
};

struct SgdState {
  SgdConfig config;
  double learning_rate = 0.1;  // current, set from lr_at_epoch
  std::vector<Dense> velocity;

  friend bool operator==(const SgdState&, const SgdState&) = default;
};

SgdState make_sgd_state(const MlpModel& model, const SgdConfig& config);

// initial_lr * decay_factor^(#milestones <= epoch)
double lr_at_epoch(const SgdConfig& config, std::size_t epoch);

// Heavy-ball momentum with L2 folded into the gradient:
//   v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
// Throws ErrorKind::Divergence on a non-finite gradient and leaves the model untouched.
void sgd_step(MlpModel& model, const Gradients& grads, SgdState& state);

struct Checkpoint {
  MlpModel model;
  SgdState optimizer;
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Binary layout (little-endian): "DOSCKPT1", u32 dim count, u32 dims, f64
// weights then bias per layer, optimizer scalars + u32 milestone count + u64
// milestones, f64 velocity blocks, u64 epoch, u64 seed, u64 config hash.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dos
