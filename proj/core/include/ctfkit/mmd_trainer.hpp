#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctfkit/dataset.hpp"
#include "ctfkit/distributions.hpp"
#include "ctfkit/monotone_net.hpp"
#include "ctfkit/rng.hpp"

namespace ctfkit {

/// Gaussian kernel K(a, b) = exp(-(a - b)^2 / (2 gamma^2)) used inside the
/// training loss.
struct RbfLossKernel {
  double gamma = 1.0;

  double operator()(double a, double b) const {
    const double d = a - b;
    return std::exp(-d * d / (2.0 * gamma * gamma));
  }
};

/// Biased (V-statistic) squared MMD between two empirical samples.
double mmd_sq(const RbfLossKernel& kernel, std::span<const double> xs, std::span<const double> ys);

/// Median pairwise distance of at most 1024 evenly strided values, floored
/// at 0.1.
RbfLossKernel loss_kernel_bandwidth(std::span<const double> scaled_ys);

enum class NoiseMode {
  Redraw,  // fresh noise for every point at every epoch
  Fixed,   // one noise batch per point for the whole run
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::size_t n_prime = 64;
  std::uint64_t seed = 0;
  Dist1D noise = Normal{0.0, 1.0};
  std::size_t hidden_layers = 4;
  std::size_t width = 64;
  NoiseMode noise_mode = NoiseMode::Redraw;

  /// Throws ConfigError when a count is zero, n_prime < 2, the learning rate
  /// is not positive, or the noise is neither Normal nor Uniform.
  void validate() const;
};

/// Column-wise z-score.
struct ScalerParams {
  static constexpr double kSdFloor = 1e-8;

  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  /// Columns of `data` are the features.
  static ScalerParams fit(const Eigen::MatrixXd& data);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.size()); }
  /// Scales the rows of `features` (dim x B), one feature per row.
  Eigen::MatrixXd scale(const Eigen::MatrixXd& features) const;
  double scale1(double v) const { return (v - mean(0)) / sd(0); }
  double unscale1(double v) const { return v * sd(0) + mean(0); }
};

/// Learned increasing transport psi(e | parents) in data units.
struct MonotoneTransport {
  MonotoneMlp net;
  ScalerParams input_scaler;   // over the parents, may be zero-dimensional
  ScalerParams output_scaler;  // over the node
  Dist1D noise = Normal{0.0, 1.0};

  std::size_t parent_count() const noexcept { return input_scaler.dim(); }

  double operator()(double e, std::span<const double> parents) const;

  /// noise: B values; parents: parent_count() x B in data units.
  Eigen::RowVectorXd evaluate(const Eigen::RowVectorXd& noise, const Eigen::MatrixXd& parents) const;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  double bandwidth = 0.0;
  double seconds = 0.0;
  std::size_t steps = 0;
};

struct BatchLoss {
  double loss = 0.0;
  Gradients grads;
};

/// Loss_K over a batch: the mean over points of
///   (1/n'^2) sum_{j,j'} K(yhat_j, yhat_j') - (2/n') sum_j K(yhat_j, y),
/// with gradients by reverse mode. `parents` is k x B (scaled), `targets` B
/// (scaled), `noise` n' x B.
BatchLoss batch_loss_and_grads(const MonotoneMlp& net, const Eigen::MatrixXd& parents,
                               const Eigen::VectorXd& targets, const Eigen::MatrixXd& noise,
                               const RbfLossKernel& kernel);

struct FitResult {
  MonotoneTransport transport;
  TrainReport report;
};

/// Distributional regression of column `node` on columns `parent_cols`.
FitResult fit_node(const Dataset& data, std::size_t node, const std::vector<std::size_t>& parent_cols,
                   const TrainConfig& config, Rng& rng);

}  // namespace ctfkit
