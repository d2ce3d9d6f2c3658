#include "ctfkit/monotone_net.hpp"

#include <algorithm>
#include <cmath>

#include "ctfkit/error.hpp"

namespace ctfkit {
namespace {

// Multiplies `grad` by the derivative of the combined activation at `z`.
// Kinks get 0.
void apply_activation_slope(Eigen::MatrixXd& grad, const Eigen::MatrixXd& z, const ActivationSplit& split) {
  const auto b = static_cast<Eigen::Index>(split.breve);
  const auto h = static_cast<Eigen::Index>(split.hat);
  const auto t = static_cast<Eigen::Index>(split.tilde);
  if (b > 0) grad.topRows(b).array() *= (z.topRows(b).array() > 0.0).cast<double>();
  if (h > 0) grad.middleRows(b, h).array() *= (z.middleRows(b, h).array() < 0.0).cast<double>();
  if (t > 0) {
    const auto zt = z.bottomRows(t).array();
    grad.bottomRows(t).array() *= ((zt > -1.0) && (zt < 1.0)).cast<double>();
  }
}

void activate_in_place(Eigen::MatrixXd& z, const ActivationSplit& split) {
  const auto b = static_cast<Eigen::Index>(split.breve);
  const auto h = static_cast<Eigen::Index>(split.hat);
  const auto t = static_cast<Eigen::Index>(split.tilde);
  if (b > 0) z.topRows(b) = z.topRows(b).cwiseMax(0.0);
  if (h > 0) z.middleRows(b, h) = z.middleRows(b, h).cwiseMin(0.0);
  if (t > 0) z.bottomRows(t) = z.bottomRows(t).cwiseMax(-1.0).cwiseMin(1.0);
}

void check_input(const MonotoneMlp& net, const Eigen::MatrixXd& inputs) {
  if (net.depth() == 0) fail(ErrorCode::InvalidArgument, "network has no layers");
  if (static_cast<std::size_t>(inputs.rows()) != net.input_dim()) {
    fail(ErrorCode::DimensionMismatch, "network expects " + std::to_string(net.input_dim()) +
                                           " inputs, got " + std::to_string(inputs.rows()));
  }
}

void check_output(const Eigen::RowVectorXd& y) {
  if (!y.allFinite()) fail(ErrorCode::NonFiniteOutput, "network produced a non-finite output");
}

}  // namespace

MonotoneIndicator::MonotoneIndicator(std::vector<int> entries) : entries_(std::move(entries)) {
  for (int v : entries_) {
    if (v < -1 || v > 1) fail(ErrorCode::InvalidArgument, "indicator entries must be -1, 0 or 1");
  }
}

MonotoneIndicator MonotoneIndicator::all(std::size_t n, int value) {
  return MonotoneIndicator(std::vector<int>(n, value));
}

Eigen::MatrixXd constrained_weights(const Eigen::MatrixXd& raw, const MonotoneIndicator& iota) {
  if (static_cast<std::size_t>(raw.cols()) != iota.size()) {
    fail(ErrorCode::DimensionMismatch, "indicator length " + std::to_string(iota.size()) +
                                           " does not match " + std::to_string(raw.cols()) +
                                           " columns");
  }
  Eigen::MatrixXd out = raw;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const int s = iota[static_cast<std::size_t>(j)];
    if (s == 1) {
      out.col(j) = raw.col(j).cwiseAbs();
    } else if (s == -1) {
      out.col(j) = -raw.col(j).cwiseAbs();
    }
  }
  return out;
}

ActivationSplit ActivationSplit::thirds(std::size_t width) {
  ActivationSplit s;
  s.breve = (width + 2) / 3;
  s.hat = (width - s.breve + 1) / 2;
  s.tilde = width - s.breve - s.hat;
  return s;
}

double relu_convex(double z) { return std::max(z, 0.0); }
double relu_concave(double z) { return std::min(z, 0.0); }
double relu_saturating(double z) {
  return z < 0.0 ? std::max(z + 1.0, 0.0) - 1.0 : std::min(z - 1.0, 0.0) + 1.0;
}

Eigen::VectorXd combined_activation(const Eigen::VectorXd& z, const ActivationSplit& split) {
  if (static_cast<std::size_t>(z.size()) != split.width()) {
    fail(ErrorCode::DimensionMismatch, "activation split does not cover the layer width");
  }
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const auto row = static_cast<std::size_t>(i);
    if (row < split.breve) {
      out(i) = relu_convex(z(i));
    } else if (row < split.breve + split.hat) {
      out(i) = relu_concave(z(i));
    } else {
      out(i) = relu_saturating(z(i));
    }
  }
  return out;
}

MonotoneMlp::MonotoneMlp(std::vector<ConstrainedLinear> layers, std::vector<ActivationSplit> splits)
    : layers_(std::move(layers)), splits_(std::move(splits)) {
  if (layers_.empty()) fail(ErrorCode::InvalidArgument, "network needs at least one layer");
  if (splits_.size() + 1 != layers_.size()) {
    fail(ErrorCode::DimensionMismatch, "need one activation split per hidden layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.iota.size() != layer.in_dim() ||
        static_cast<std::size_t>(layer.bias.size()) != layer.out_dim()) {
      fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + " has inconsistent shapes");
    }
    if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim()) {
      fail(ErrorCode::DimensionMismatch, "layer " + std::to_string(l) + " input width mismatch");
    }
    if (l + 1 < layers_.size() && splits_[l].width() != layer.out_dim()) {
      fail(ErrorCode::DimensionMismatch, "split of layer " + std::to_string(l) + " has wrong width");
    }
  }
  if (layers_.back().out_dim() != 1) fail(ErrorCode::DimensionMismatch, "output must be scalar");
}

std::size_t MonotoneMlp::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.raw.size() + l.bias.size());
  return n;
}

MonotoneMlp init_mlp(const MlpShape& shape, Rng& rng) {
  if (shape.input_dim == 0 || shape.width == 0) {
    fail(ErrorCode::InvalidArgument, "network shape needs positive input and width");
  }
  std::vector<ConstrainedLinear> layers;
  std::vector<ActivationSplit> splits;
  std::size_t fan_in = shape.input_dim;
  for (std::size_t l = 0; l <= shape.hidden_layers; ++l) {
    const bool output = l == shape.hidden_layers;
    const std::size_t fan_out = output ? 1 : shape.width;
    ConstrainedLinear layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    layer.raw.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index j = 0; j < layer.raw.cols(); ++j) {
      for (Eigen::Index i = 0; i < layer.raw.rows(); ++i) {
        layer.raw(i, j) = bound * (2.0 * rng.uniform_open() - 1.0);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    if (!shape.monotone_in_first) {
      layer.iota = MonotoneIndicator::all(fan_in, 0);
    } else if (l == 0) {
      std::vector<int> iota(fan_in, 0);
      iota[0] = 1;
      layer.iota = MonotoneIndicator(std::move(iota));
    } else {
      layer.iota = MonotoneIndicator::all(fan_in, 1);
    }
    layers.push_back(std::move(layer));
    if (!output) {
      splits.push_back(shape.monotone_in_first ? ActivationSplit::thirds(shape.width)
                                               : ActivationSplit::relu_only(shape.width));
    }
    fan_in = fan_out;
  }
  return MonotoneMlp(std::move(layers), std::move(splits));
}

ForwardCache forward_batch(const MonotoneMlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs);
  ForwardCache cache;
  const auto& layers = net.layers();
  cache.effective.reserve(layers.size());
  cache.activations.reserve(layers.size());
  cache.preacts.reserve(layers.size() - 1);
  cache.activations.push_back(inputs);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cache.effective.push_back(constrained_weights(layers[l].raw, layers[l].iota));
    Eigen::MatrixXd z = cache.effective.back() * cache.activations.back();
    z.colwise() += layers[l].bias;
    if (l + 1 == layers.size()) {
      cache.output = z.row(0);
    } else {
      cache.preacts.push_back(z);
      activate_in_place(z, net.splits()[l]);
      cache.activations.push_back(std::move(z));
    }
  }
  check_output(cache.output);
  return cache;
}

Eigen::RowVectorXd evaluate_batch(const MonotoneMlp& net, const Eigen::MatrixXd& inputs) {
  check_input(net, inputs);
  const auto& layers = net.layers();
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = constrained_weights(layers[l].raw, layers[l].iota) * a;
    z.colwise() += layers[l].bias;
    if (l + 1 < layers.size()) activate_in_place(z, net.splits()[l]);
    a = std::move(z);
  }
  Eigen::RowVectorXd y = a.row(0);
  check_output(y);
  return y;
}

std::pair<double, ForwardCache> forward(const MonotoneMlp& net, double e,
                                        std::span<const double> x) {
  Eigen::MatrixXd input(static_cast<Eigen::Index>(x.size() + 1), 1);
  input(0, 0) = e;
  for (std::size_t k = 0; k < x.size(); ++k) input(static_cast<Eigen::Index>(k + 1), 0) = x[k];
  ForwardCache cache = forward_batch(net, input);
  const double y = cache.output(0);
  return {y, std::move(cache)};
}

Gradients Gradients::zeros_like(const MonotoneMlp& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.raw.push_back(Eigen::MatrixXd::Zero(l.raw.rows(), l.raw.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t l = 0; l < raw.size(); ++l) {
    raw[l] += other.raw[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

Gradients backward(const MonotoneMlp& net, const ForwardCache& cache,
                   const Eigen::RowVectorXd& dl_dy) {
  const auto& layers = net.layers();
  if (dl_dy.size() != cache.output.size()) {
    fail(ErrorCode::DimensionMismatch, "upstream gradient does not match the batch size");
  }
  Gradients grads;
  grads.raw.resize(layers.size());
  grads.bias.resize(layers.size());

  Eigen::MatrixXd delta = dl_dy;  // gradient w.r.t. the layer's pre-activation
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[l];
    Eigen::MatrixXd d_eff = delta * input.transpose();
    grads.bias[l] = delta.rowwise().sum();

    // Chain through |M|_iota.
    const auto& layer = layers[l];
    for (Eigen::Index j = 0; j < d_eff.cols(); ++j) {
      const int s = layer.iota[static_cast<std::size_t>(j)];
      if (s == 0) continue;
      d_eff.col(j).array() *= static_cast<double>(s) * layer.raw.col(j).array().sign();
    }
    grads.raw[l] = std::move(d_eff);

    if (l == 0) break;
    Eigen::MatrixXd d_act = cache.effective[l].transpose() * delta;
    apply_activation_slope(d_act, cache.preacts[l - 1], net.splits()[l - 1]);
    delta = std::move(d_act);
  }
  return grads;
}

Gradients backward(const MonotoneMlp& net, const ForwardCache& cache, double dl_dy) {
  return backward(net, cache, Eigen::RowVectorXd::Constant(cache.output.size(), dl_dy));
}

AdamState AdamState::for_net(const MonotoneMlp& net, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.first = Gradients::zeros_like(net);
  state.second = Gradients::zeros_like(net);
  return state;
}

void adam_step(MonotoneMlp& net, const Gradients& grads, AdamState& state) {
  auto& layers = net.layers();
  if (grads.raw.size() != layers.size() || state.first.raw.size() != layers.size()) {
    fail(ErrorCode::DimensionMismatch, "gradient and optimizer state do not match the network");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    param.array() -= state.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + state.eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].raw, grads.raw[l], state.first.raw[l], state.second.raw[l]);
    update(layers[l].bias, grads.bias[l], state.first.bias[l], state.second.bias[l]);
  }
}

}  // namespace ctfkit
