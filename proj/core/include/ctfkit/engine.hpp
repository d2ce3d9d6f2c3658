#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctfkit/causal_graph.hpp"
#include "ctfkit/dataset.hpp"
#include "ctfkit/mmd_trainer.hpp"
#include "ctfkit/normalization.hpp"
#include "ctfkit/rng.hpp"

namespace ctfkit {

/// Values come from dataset rows; the node has no transport.
struct DataSourceNode {};

struct ModeledNode {
  MonotoneTransport transport;
  TrainConfig config;  // echo of what produced the transport
};

using NodeKind = std::variant<DataSourceNode, ModeledNode>;

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

/// A causal graph with one increasing transport per modeled node. The
/// counterfactual conception is not part of the model; it is supplied per
/// query.
class TrainedModel {
 public:
  /// Throws ArityMismatch when a transport's parent count differs from the
  /// node's parent list.
  TrainedModel(Dag dag, std::vector<NodeKind> kinds, Provenance provenance = {});

  const Dag& dag() const noexcept { return dag_; }
  const std::vector<NodeKind>& kinds() const noexcept { return kinds_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  std::size_t n_vars() const noexcept { return dag_.n_vars(); }

  bool is_modeled(std::size_t node) const { return std::holds_alternative<ModeledNode>(kinds_.at(node)); }
  /// Throws NodeNotModeled for data-source nodes.
  const ModeledNode& modeled(std::size_t node) const;
  const MonotoneTransport& transport(std::size_t node) const { return modeled(node).transport; }

 private:
  Dag dag_;
  std::vector<NodeKind> kinds_;
  std::vector<std::size_t> order_;
  Provenance provenance_;
};

/// Where data-source values come from during sampling.
class RowSource {
 public:
  enum class Mode { None, Resample, Fixed };

  static RowSource none() { return RowSource(); }
  /// Rows drawn with replacement; columns matched to variables by name.
  /// Variables absent from the dataset read as NaN.
  static RowSource resample(const Dataset& data, const Dag& dag);
  /// One row of n_vars values, used for every sample.
  static RowSource fixed(std::vector<double> row);
  static RowSource fixed_from(const Dataset& data, const Dag& dag, std::size_t row);

  Mode mode() const noexcept { return mode_; }
  std::size_t row_count() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
  double value(std::size_t row, std::size_t var) const;
  /// Dataset row behind a fixed row, when it came from one.
  std::optional<std::size_t> fixed_row_id() const noexcept { return fixed_id_; }

 private:
  Mode mode_ = Mode::None;
  Eigen::MatrixXd rows_;  // rows x n_vars
  std::optional<std::size_t> fixed_id_;
};

/// n samples x W worlds x d variables.
class WorldTensor {
 public:
  WorldTensor(std::size_t n, std::vector<InterventionSpec> worlds, std::size_t n_vars);

  std::size_t samples() const noexcept { return n_; }
  std::size_t world_count() const noexcept { return worlds_.size(); }
  std::size_t n_vars() const noexcept { return d_; }
  const std::vector<InterventionSpec>& worlds() const noexcept { return worlds_; }

  double& at(std::size_t s, std::size_t w, std::size_t v) { return data_[(s * worlds_.size() + w) * d_ + v]; }
  double at(std::size_t s, std::size_t w, std::size_t v) const {
    return data_[(s * worlds_.size() + w) * d_ + v];
  }
  /// Values of variable v in world w across samples.
  std::vector<double> slice(std::size_t w, std::size_t v) const;

  std::vector<std::optional<std::size_t>>& row_ids() noexcept { return row_ids_; }
  const std::vector<std::optional<std::size_t>>& row_ids() const noexcept { return row_ids_; }

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<InterventionSpec> worlds_;
  std::vector<double> data_;
  std::vector<std::optional<std::size_t>> row_ids_;
};

/// Joint cross-world sampling. Nodes are visited in topological order; a
/// data-source node takes phi_w(row value), a modeled node draws one latent
/// vector across worlds from its normalization at the per-world parent
/// values and maps each coordinate through its transport, then phi_w.
/// `norms` has one entry per variable (ignored for data sources).
WorldTensor sample_counterfactual(const TrainedModel& model, const WorldSet& worlds,
                                  std::span<const NormalizationSpec> norms, Rng& rng, std::size_t n,
                                  const RowSource& rows);

/// Same normalization for every node.
std::vector<NormalizationSpec> uniform_norms(const TrainedModel& model, const NormalizationSpec& spec);

/// Monte-Carlo mean of psi(e | parents) over e ~ noise.
double conditional_mean(const TrainedModel& model, std::size_t node, std::span<const double> parents,
                        std::size_t n, Rng& rng);

/// psi(G(q) | parents) with G the noise quantile function.
double conditional_quantile(const TrainedModel& model, std::size_t node,
                            std::span<const double> parents, double q);

/// `phi` is a full-width intervention; only the node's parents are read.
double interventional_mean(const TrainedModel& model, std::size_t node,
                           std::span<const double> parents, const InterventionSpec& phi,
                           std::size_t n, Rng& rng);

struct EffectEstimate {
  double effect = 0.0;
  double std_error = 0.0;
};

/// E[Y^phi - Y | parents] with common noise draws for both terms.
EffectEstimate interventional_effect(const TrainedModel& model, std::size_t node,
                                     std::span<const double> parents, const InterventionSpec& phi,
                                     std::size_t n, Rng& rng);

/// Pairs (psi(e1 | phi1(x)), psi(e2 | phi2(x))) with (e1, e2) from the
/// two-world latent law of `norm` at indices (phi1(x), phi2(x)).
std::vector<std::pair<double, double>> paired_effect_samples(
    const TrainedModel& model, std::size_t node, std::span<const double> parents,
    const InterventionSpec& phi1, const InterventionSpec& phi2, const NormalizationSpec& norm,
    std::size_t n, Rng& rng);

/// Settings of the plain regressor used to condition on the first world.
struct SecondaryConfig {
  std::size_t hidden_layers = 1;
  std::size_t width = 128;
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::size_t replications = 10;
};

/// Plain MSE network for E[Y1 | Y0 = y0]. Parameterized as
/// y0 + h(y0) with h's output layer starting at zero.
struct ShiftRegressor {
  MonotoneMlp net;
  ScalerParams input_scaler;
  ScalerParams residual_scaler;

  double predict(double y0) const;
  Eigen::RowVectorXd predict(const Eigen::RowVectorXd& y0) const;
};

ShiftRegressor fit_shift_regressor(std::span<const double> y0, std::span<const double> y1,
                                   const SecondaryConfig& config, Rng& rng);

struct QuantileEffectPoint {
  double q = 0.0;
  double effect = 0.0;
  double std_error = 0.0;
};

/// E[Y1 - Y0 | Y0 = G0(q)] for the two worlds. Each replication draws n
/// joint samples, fits a ShiftRegressor and evaluates it at the empirical
/// quantiles of Y0; `effect` is the mean across replications and `std_error`
/// its standard error.
std::vector<QuantileEffectPoint> quantile_effect_curve(
    const TrainedModel& model, std::size_t node, const InterventionSpec& world0,
    const InterventionSpec& world1, const NormalizationSpec& norm, std::span<const double> qs,
    std::size_t n, Rng& rng, const RowSource& rows, const SecondaryConfig& secondary = {});

/// Individual trajectories along do(var = g) for g in `grid`: each row is one
/// latent draw across all grid worlds. `parents` gives the other parent
/// values; `parent_slot` selects which parent the grid replaces.
Eigen::MatrixXd individual_curves(const TrainedModel& model, std::size_t node,
                                  std::span<const double> parents, std::size_t parent_slot,
                                  std::span<const double> grid, const NormalizationSpec& norm,
                                  std::size_t individuals, Rng& rng);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace ctfkit
