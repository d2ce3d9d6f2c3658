#include "ctfkit/mmd_trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "ctfkit/error.hpp"

namespace ctfkit {
namespace {

constexpr std::size_t kBandwidthSubsample = 1024;
constexpr double kBandwidthFloor = 0.1;

double mean_kernel(const RbfLossKernel& kernel, std::span<const double> a,
                   std::span<const double> b) {
  double total = 0.0;
  for (double x : a) {
    for (double y : b) total += kernel(x, y);
  }
  return total / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

void shuffle(std::vector<std::size_t>& perm, Rng& rng) {
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  }
}

}  // namespace

double mmd_sq(const RbfLossKernel& kernel, std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) fail(ErrorCode::EmptySample, "mmd of an empty sample");
  // Grouped so that swapping the arguments gives the same rounding.
  const double cross = mean_kernel(kernel, xs, ys) + mean_kernel(kernel, ys, xs);
  return (mean_kernel(kernel, xs, xs) + mean_kernel(kernel, ys, ys)) - cross;
}

RbfLossKernel loss_kernel_bandwidth(std::span<const double> scaled_ys) {
  if (scaled_ys.size() < 2) fail(ErrorCode::InsufficientData, "bandwidth needs two values");
  const std::size_t stride = (scaled_ys.size() + kBandwidthSubsample - 1) / kBandwidthSubsample;
  std::vector<double> sub;
  for (std::size_t i = 0; i < scaled_ys.size(); i += stride) sub.push_back(scaled_ys[i]);
  std::vector<double> dists;
  dists.reserve(sub.size() * (sub.size() - 1) / 2);
  for (std::size_t i = 0; i < sub.size(); ++i) {
    for (std::size_t j = i + 1; j < sub.size(); ++j) dists.push_back(std::abs(sub[i] - sub[j]));
  }
  const auto mid = dists.begin() + static_cast<long>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dists.begin(), mid));
  }
  return RbfLossKernel{std::max(median, kBandwidthFloor)};
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || hidden_layers == 0 || width == 0) {
    fail(ErrorCode::ConfigError, "epochs, batch_size, hidden_layers and width must be positive");
  }
  if (n_prime < 2) fail(ErrorCode::ConfigError, "n_prime must be at least 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorCode::ConfigError, "learning_rate must be positive");
  }
  ctfkit::validate(noise);
  if (!std::holds_alternative<Normal>(noise) && !std::holds_alternative<Uniform>(noise)) {
    fail(ErrorCode::ConfigError, "training noise must be normal or uniform");
  }
}

ScalerParams ScalerParams::fit(const Eigen::MatrixXd& data) {
  ScalerParams s;
  const auto n = static_cast<double>(data.rows());
  s.mean = data.colwise().mean().transpose();
  s.sd.resize(data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const double var =
        n > 0 ? (data.col(c).array() - s.mean(c)).square().sum() / n : 0.0;
    s.sd(c) = std::max(std::sqrt(var), kSdFloor);
  }
  return s;
}

Eigen::MatrixXd ScalerParams::scale(const Eigen::MatrixXd& features) const {
  if (features.rows() != mean.size()) {
    fail(ErrorCode::DimensionMismatch, "scaler expects " + std::to_string(mean.size()) +
                                           " features, got " + std::to_string(features.rows()));
  }
  return (features.colwise() - mean).array().colwise() / sd.array();
}

double MonotoneTransport::operator()(double e, std::span<const double> parents) const {
  Eigen::RowVectorXd noise(1);
  noise(0) = e;
  const Eigen::MatrixXd p =
      Eigen::Map<const Eigen::VectorXd>(parents.data(), static_cast<Eigen::Index>(parents.size()));
  return evaluate(noise, p)(0);
}

Eigen::RowVectorXd MonotoneTransport::evaluate(const Eigen::RowVectorXd& noise,
                                               const Eigen::MatrixXd& parents) const {
  if (static_cast<std::size_t>(parents.rows()) != parent_count() ||
      parents.cols() != noise.size()) {
    fail(ErrorCode::ArityMismatch, "transport expects " + std::to_string(parent_count()) +
                                       " parents per noise value");
  }
  Eigen::MatrixXd input(parents.rows() + 1, noise.size());
  input.row(0) = noise;
  if (parents.rows() > 0) input.bottomRows(parents.rows()) = input_scaler.scale(parents);
  Eigen::RowVectorXd y = evaluate_batch(net, input);
  return (y.array() * output_scaler.sd(0) + output_scaler.mean(0)).matrix();
}

BatchLoss batch_loss_and_grads(const MonotoneMlp& net, const Eigen::MatrixXd& parents,
                               const Eigen::VectorXd& targets, const Eigen::MatrixXd& noise,
                               const RbfLossKernel& kernel) {
  const Eigen::Index batch = targets.size();
  const Eigen::Index n_prime = noise.rows();
  if (batch == 0) fail(ErrorCode::EmptySample, "empty batch");
  if (n_prime < 2) fail(ErrorCode::InvalidArgument, "loss needs at least two noise draws");
  if (parents.cols() != batch || noise.cols() != batch) {
    fail(ErrorCode::DimensionMismatch, "batch parts disagree on the batch size");
  }

  Eigen::MatrixXd input(parents.rows() + 1, batch * n_prime);
  for (Eigen::Index b = 0; b < batch; ++b) {
    auto block = input.middleCols(b * n_prime, n_prime);
    block.row(0) = noise.col(b).transpose();
    if (parents.rows() > 0) block.bottomRows(parents.rows()).colwise() = parents.col(b);
  }

  ForwardCache cache;
  try {
    cache = forward_batch(net, input);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonFiniteOutput) fail(ErrorCode::NonFiniteLoss, e.what());
    throw;
  }

  const double inv_gamma_sq = 1.0 / (kernel.gamma * kernel.gamma);
  const double np = static_cast<double>(n_prime);
  const double scale_pairs = 1.0 / (np * np);
  const double scale_target = 2.0 / np;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  double loss = 0.0;
  Eigen::RowVectorXd dl_dy(batch * n_prime);
  Eigen::MatrixXd diff(n_prime, n_prime);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Eigen::VectorXd y = cache.output.segment(b * n_prime, n_prime).transpose();
    diff = y.replicate(1, n_prime) - y.transpose().replicate(n_prime, 1);  // y_j - y_j'
    const Eigen::MatrixXd k = (-0.5 * inv_gamma_sq * diff.array().square()).exp().matrix();
    const Eigen::ArrayXd t_diff = y.array() - targets(b);
    const Eigen::ArrayXd k_t = (-0.5 * inv_gamma_sq * t_diff.square()).exp();

    loss += scale_pairs * k.sum() - scale_target * k_t.sum();

    // d/dy_j of sum_{j,j'} K(y_j, y_j') = 2 sum_j' K_jj' * (-(y_j - y_j') / gamma^2).
    const Eigen::ArrayXd d_pairs =
        -2.0 * inv_gamma_sq * (k.array() * diff.array()).rowwise().sum();
    const Eigen::ArrayXd d_target = inv_gamma_sq * k_t * t_diff;
    dl_dy.segment(b * n_prime, n_prime) =
        (inv_batch * (scale_pairs * d_pairs + scale_target * d_target)).matrix().transpose();
  }
  loss *= inv_batch;
  if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "batch loss is not finite");

  return BatchLoss{loss, backward(net, cache, dl_dy)};
}

FitResult fit_node(const Dataset& data, std::size_t node, const std::vector<std::size_t>& parent_cols,
                   const TrainConfig& config, Rng& rng) {
  config.validate();
  if (node >= data.cols()) fail(ErrorCode::MissingColumn, "node column out of range");
  for (std::size_t p : parent_cols) {
    if (p >= data.cols()) fail(ErrorCode::MissingColumn, "parent column out of range");
  }
  const std::size_t n = data.rows();
  if (n < config.batch_size || n < 2) {
    fail(ErrorCode::InsufficientData, "training needs at least batch_size = " +
                                          std::to_string(config.batch_size) + " rows, got " +
                                          std::to_string(n));
  }
  const auto start = std::chrono::steady_clock::now();

  const auto k = static_cast<Eigen::Index>(parent_cols.size());
  Eigen::MatrixXd parents_raw(n, k);  // rows x parents, for the scaler
  for (Eigen::Index c = 0; c < k; ++c) parents_raw.col(c) = data.values.col(static_cast<Eigen::Index>(parent_cols[c]));
  const Eigen::MatrixXd target_raw = data.values.col(static_cast<Eigen::Index>(node));

  MonotoneTransport transport;
  transport.noise = config.noise;
  transport.input_scaler = ScalerParams::fit(parents_raw);
  transport.output_scaler = ScalerParams::fit(target_raw);

  const Eigen::MatrixXd parents =
      k > 0 ? transport.input_scaler.scale(parents_raw.transpose()) : Eigen::MatrixXd(0, n);
  const Eigen::VectorXd targets =
      transport.output_scaler.scale(target_raw.transpose()).row(0).transpose();

  const RbfLossKernel kernel =
      loss_kernel_bandwidth(std::span<const double>(targets.data(), targets.size()));

  Rng init_rng = rng.split(1);
  Rng shuffle_rng = rng.split(2);
  Rng noise_rng = rng.split(3);
  transport.net = init_mlp({static_cast<std::size_t>(k) + 1, config.hidden_layers, config.width, true},
                           init_rng);
  AdamState adam = AdamState::for_net(transport.net, config.learning_rate);

  const auto n_prime = static_cast<Eigen::Index>(config.n_prime);
  Eigen::MatrixXd fixed_noise;
  if (config.noise_mode == NoiseMode::Fixed) {
    fixed_noise.resize(n_prime, static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < fixed_noise.cols(); ++c) {
      for (Eigen::Index j = 0; j < n_prime; ++j) fixed_noise(j, c) = sample_one(config.noise, noise_rng);
    }
  }

  TrainReport report;
  report.bandwidth = kernel.gamma;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(perm, shuffle_rng);
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd batch_parents(k, b);
      Eigen::VectorXd batch_targets(b);
      Eigen::MatrixXd batch_noise(n_prime, b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto row = static_cast<Eigen::Index>(perm[begin + static_cast<std::size_t>(i)]);
        if (k > 0) batch_parents.col(i) = parents.col(row);
        batch_targets(i) = targets(row);
        if (config.noise_mode == NoiseMode::Fixed) {
          batch_noise.col(i) = fixed_noise.col(row);
        } else {
          for (Eigen::Index j = 0; j < n_prime; ++j) batch_noise(j, i) = sample_one(config.noise, noise_rng);
        }
      }
      BatchLoss step;
      try {
        step = batch_loss_and_grads(transport.net, batch_parents, batch_targets, batch_noise, kernel);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFiniteLoss) {
          fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": " + e.what());
        }
        throw;
      }
      adam_step(transport.net, step.grads, adam);
      epoch_total += step.loss * static_cast<double>(b);
      ++report.steps;
    }
    report.epoch_loss.push_back(epoch_total / static_cast<double>(n));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return FitResult{std::move(transport), std::move(report)};
}

}  // namespace ctfkit
