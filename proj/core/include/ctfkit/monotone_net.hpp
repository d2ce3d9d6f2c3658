#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctfkit/rng.hpp"

namespace ctfkit {

/// Per-input monotonicity: +1 increasing, -1 decreasing, 0 unconstrained.
class MonotoneIndicator {
 public:
  MonotoneIndicator() = default;
  explicit MonotoneIndicator(std::vector<int> entries);

  static MonotoneIndicator all(std::size_t n, int value);

  std::size_t size() const noexcept { return entries_.size(); }
  int operator[](std::size_t j) const { return entries_.at(j); }
  const std::vector<int>& entries() const noexcept { return entries_; }

 private:
  std::vector<int> entries_;
};

/// |M|_iota: column j becomes |M(:,j)| when iota_j = 1, -|M(:,j)| when
/// iota_j = -1, and is left alone when iota_j = 0.
Eigen::MatrixXd constrained_weights(const Eigen::MatrixXd& raw, const MonotoneIndicator& iota);

struct ConstrainedLinear {
  Eigen::MatrixXd raw;   // out x in
  Eigen::VectorXd bias;  // out
  MonotoneIndicator iota;

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(raw.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(raw.rows()); }
};

/// Width split between the convex (ReLU), concave (reflected ReLU) and
/// saturating (hard-tanh) activations, in that order.
struct ActivationSplit {
  std::size_t breve = 0;
  std::size_t hat = 0;
  std::size_t tilde = 0;

  std::size_t width() const noexcept { return breve + hat + tilde; }

  /// breve = ceil(R/3), hat = ceil((R - breve)/2), tilde = the rest.
  static ActivationSplit thirds(std::size_t width);
  static ActivationSplit relu_only(std::size_t width) { return {width, 0, 0}; }

  bool operator==(const ActivationSplit&) const = default;
};

double relu_convex(double z);
double relu_concave(double z);
double relu_saturating(double z);

Eigen::VectorXd combined_activation(const Eigen::VectorXd& z, const ActivationSplit& split);

struct MlpShape {
  std::size_t input_dim = 1;       // including the noise input
  std::size_t hidden_layers = 1;   // L
  std::size_t width = 8;           // R
  bool monotone_in_first = true;   // false gives an ordinary ReLU MLP
};

/// Feed-forward network of constrained linear layers. Every hidden layer is
/// followed by the combined activation; the output layer is linear with a
/// single unit. When `monotone_in_first` the first input has indicator +1 and
/// every later layer is all +1, so the output is nondecreasing in it.
class MonotoneMlp {
 public:
  MonotoneMlp() = default;
  MonotoneMlp(std::vector<ConstrainedLinear> layers, std::vector<ActivationSplit> splits);

  std::size_t input_dim() const noexcept { return layers_.front().in_dim(); }
  std::size_t depth() const noexcept { return layers_.size(); }
  const std::vector<ConstrainedLinear>& layers() const noexcept { return layers_; }
  std::vector<ConstrainedLinear>& layers() noexcept { return layers_; }
  const std::vector<ActivationSplit>& splits() const noexcept { return splits_; }
  std::size_t parameter_count() const noexcept;

 private:
  std::vector<ConstrainedLinear> layers_;
  std::vector<ActivationSplit> splits_;  // one per hidden layer
};

/// Raw weights uniform on +-1/sqrt(fan_in), biases zero.
MonotoneMlp init_mlp(const MlpShape& shape, Rng& rng);

struct ForwardCache {
  std::vector<Eigen::MatrixXd> effective;    // |M|_iota per layer
  std::vector<Eigen::MatrixXd> activations;  // [0] = inputs, then post-activation per hidden layer
  std::vector<Eigen::MatrixXd> preacts;      // pre-activation per hidden layer
  Eigen::RowVectorXd output;
};

/// Batched forward pass over the columns of `inputs` (input_dim x B).
/// Throws NonFiniteOutput if any output is NaN or infinite.
ForwardCache forward_batch(const MonotoneMlp& net, const Eigen::MatrixXd& inputs);

/// Forward without keeping intermediates.
Eigen::RowVectorXd evaluate_batch(const MonotoneMlp& net, const Eigen::MatrixXd& inputs);

/// Single evaluation at input (e, x_1, ..., x_k).
std::pair<double, ForwardCache> forward(const MonotoneMlp& net, double e,
                                        std::span<const double> x);

struct Gradients {
  std::vector<Eigen::MatrixXd> raw;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const MonotoneMlp& net);
  Gradients& operator+=(const Gradients& other);
};

/// Reverse-mode gradients of sum_b dL_dy(b) * y(b) with respect to the raw
/// weights and biases. Kinks (|m| at 0, activation breakpoints) take
/// subgradient 0.
Gradients backward(const MonotoneMlp& net, const ForwardCache& cache,
                   const Eigen::RowVectorXd& dl_dy);
Gradients backward(const MonotoneMlp& net, const ForwardCache& cache, double dl_dy);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  Gradients first;
  Gradients second;

  static AdamState for_net(const MonotoneMlp& net, double learning_rate);
};

/// Bias-corrected Adam update in place.
void adam_step(MonotoneMlp& net, const Gradients& grads, AdamState& state);

}  // namespace ctfkit
