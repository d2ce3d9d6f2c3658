#include "ctfkit/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "ctfkit/error.hpp"
#include "ctfkit/parallel.hpp"

namespace ctfkit {
namespace {

constexpr std::size_t kEvalChunk = 4096;

void require_parent_arity(const TrainedModel& model, std::size_t node, std::span<const double> parents) {
  const std::size_t expected = model.dag().parents(node).size();
  if (parents.size() != expected) {
    fail(ErrorCode::ArityMismatch, "node '" + model.dag().name(node) + "' has " +
                                       std::to_string(expected) + " parents, got " +
                                       std::to_string(parents.size()) + " values");
  }
}

// Evaluates the transport over many columns, chunked across workers.
Eigen::RowVectorXd evaluate_chunked(const MonotoneTransport& transport, const Eigen::RowVectorXd& noise,
                                    const Eigen::MatrixXd& parents) {
  Eigen::RowVectorXd out(noise.size());
  parallel_chunks(static_cast<std::size_t>(noise.size()), kEvalChunk,
                  [&](std::size_t begin, std::size_t end) {
                    const auto b = static_cast<Eigen::Index>(begin);
                    const auto len = static_cast<Eigen::Index>(end - begin);
                    out.segment(b, len) =
                        transport.evaluate(noise.segment(b, len), parents.middleCols(b, len));
                  });
  return out;
}

Eigen::MatrixXd replicate_parents(std::span<const double> parents, Eigen::Index cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(parents.size()), cols);
  for (std::size_t k = 0; k < parents.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)).setConstant(parents[k]);
  }
  return out;
}

bool same_indices(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t w = 0; w < a.size(); ++w) {
    if (a[w].size() != b[w].size()) return false;
    if (!a[w].empty() && std::memcmp(a[w].data(), b[w].data(), a[w].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

// Latent draws have standard normal marginals; transports trained with
// another noise law read them through that law's quantile function.
double latent_to_noise(const Dist1D& noise, double e) {
  if (const auto* normal = std::get_if<Normal>(&noise)) return normal->mean + normal->sd * e;
  return quantile(noise, standard_normal_cdf(e));
}

bool needs_row(const WorldSet& worlds, std::size_t var) {
  for (const auto& w : worlds.worlds()) {
    if (!std::holds_alternative<SetConstant>(w[var])) return true;
  }
  return false;
}

}  // namespace

TrainedModel::TrainedModel(Dag dag, std::vector<NodeKind> kinds, Provenance provenance)
    : dag_(std::move(dag)), kinds_(std::move(kinds)), provenance_(std::move(provenance)) {
  if (kinds_.size() != dag_.n_vars()) {
    fail(ErrorCode::ArityMismatch, "need one node kind per variable");
  }
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    if (const auto* m = std::get_if<ModeledNode>(&kinds_[i])) {
      const std::size_t n_parents = dag_.parents(i).size();
      if (m->transport.parent_count() != n_parents || m->transport.net.input_dim() != n_parents + 1) {
        fail(ErrorCode::ArityMismatch, "transport of '" + dag_.name(i) + "' takes " +
                                           std::to_string(m->transport.net.input_dim()) +
                                           " inputs but the node has " + std::to_string(n_parents) +
                                           " parents");
      }
    }
  }
  order_ = topological_order(dag_);
}

const ModeledNode& TrainedModel::modeled(std::size_t node) const {
  if (node >= kinds_.size()) fail(ErrorCode::IndexOutOfRange, "node index out of range");
  const auto* m = std::get_if<ModeledNode>(&kinds_[node]);
  if (!m) fail(ErrorCode::NodeNotModeled, "node '" + dag_.name(node) + "' is a data source");
  return *m;
}

RowSource RowSource::resample(const Dataset& data, const Dag& dag) {
  if (data.rows() == 0) fail(ErrorCode::InsufficientData, "cannot resample an empty dataset");
  RowSource src;
  src.mode_ = Mode::Resample;
  src.rows_.resize(data.values.rows(), static_cast<Eigen::Index>(dag.n_vars()));
  for (std::size_t v = 0; v < dag.n_vars(); ++v) {
    const auto it = std::find(data.names.begin(), data.names.end(), dag.name(v));
    if (it == data.names.end()) {
      src.rows_.col(static_cast<Eigen::Index>(v)).setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      src.rows_.col(static_cast<Eigen::Index>(v)) = data.values.col(it - data.names.begin());
    }
  }
  return src;
}

RowSource RowSource::fixed(std::vector<double> row) {
  RowSource src;
  src.mode_ = Mode::Fixed;
  src.rows_ = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  return src;
}

RowSource RowSource::fixed_from(const Dataset& data, const Dag& dag, std::size_t row) {
  if (row >= data.rows()) {
    fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(row) + " outside dataset of " +
                                         std::to_string(data.rows()) + " rows");
  }
  RowSource all = resample(data, dag);
  RowSource src;
  src.mode_ = Mode::Fixed;
  src.rows_ = all.rows_.row(static_cast<Eigen::Index>(row));
  src.fixed_id_ = row;
  return src;
}

double RowSource::value(std::size_t row, std::size_t var) const {
  return rows_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(var));
}

WorldTensor::WorldTensor(std::size_t n, std::vector<InterventionSpec> worlds, std::size_t n_vars)
    : n_(n), d_(n_vars), worlds_(std::move(worlds)), data_(n * worlds_.size() * n_vars, 0.0),
      row_ids_(n) {}

std::vector<double> WorldTensor::slice(std::size_t w, std::size_t v) const {
  std::vector<double> out(n_);
  for (std::size_t s = 0; s < n_; ++s) out[s] = at(s, w, v);
  return out;
}

std::vector<NormalizationSpec> uniform_norms(const TrainedModel& model, const NormalizationSpec& spec) {
  return std::vector<NormalizationSpec>(model.n_vars(), spec);
}

WorldTensor sample_counterfactual(const TrainedModel& model, const WorldSet& worlds,
                                  std::span<const NormalizationSpec> norms, Rng& rng, std::size_t n,
                                  const RowSource& rows) {
  const std::size_t d = model.n_vars();
  const std::size_t w_count = worlds.size();
  if (worlds.n_vars() != d) {
    fail(ErrorCode::DimensionMismatch, "worlds cover " + std::to_string(worlds.n_vars()) +
                                           " variables, model has " + std::to_string(d));
  }
  if (norms.size() != d) fail(ErrorCode::ArityMismatch, "need one normalization per variable");

  for (std::size_t v = 0; v < d; ++v) {
    if (model.is_modeled(v) || !needs_row(worlds, v)) continue;
    if (rows.mode() == RowSource::Mode::None) {
      fail(ErrorCode::MissingRowSource,
           "data-source variable '" + model.dag().name(v) + "' needs a dataset or a fixed row");
    }
  }

  if (rows.mode() != RowSource::Mode::None && rows.width() != d) {
    fail(ErrorCode::DimensionMismatch, "row source has " + std::to_string(rows.width()) +
                                           " values per row, model has " + std::to_string(d));
  }

  Rng local(rng.next_u64());
  WorldTensor tensor(n, worlds.worlds(), d);

  std::vector<std::size_t> row_of(n, 0);
  if (rows.mode() == RowSource::Mode::Resample) {
    Rng row_rng = local.split(0);
    for (std::size_t s = 0; s < n; ++s) {
      row_of[s] = static_cast<std::size_t>(row_rng.uniform_index(rows.row_count()));
      tensor.row_ids()[s] = row_of[s];
    }
  } else if (rows.mode() == RowSource::Mode::Fixed) {
    for (std::size_t s = 0; s < n; ++s) tensor.row_ids()[s] = rows.fixed_row_id();
  }

  for (std::size_t node : model.order()) {
    if (!model.is_modeled(node)) {
      const bool row_needed = needs_row(worlds, node);
      for (std::size_t s = 0; s < n; ++s) {
        const double raw = row_needed ? rows.value(row_of[s], node) : 0.0;
        if (row_needed && std::isnan(raw)) {
          fail(ErrorCode::MissingColumn,
               "row source has no value for variable '" + model.dag().name(node) + "'");
        }
        for (std::size_t w = 0; w < w_count; ++w) tensor.at(s, w, node) = apply_action(worlds[w][node], raw);
      }
      continue;
    }

    const auto& transport = model.transport(node);
    const auto& parents = model.dag().parents(node);
    const auto k = static_cast<Eigen::Index>(parents.size());
    const auto total = static_cast<Eigen::Index>(n * w_count);
    Rng node_rng = local.split(1 + node);

    Eigen::RowVectorXd noise(total);
    Eigen::MatrixXd parent_values(k, total);
    std::vector<std::vector<double>> indices(w_count), previous;
    std::optional<LatentFactor> factor;
    std::vector<double> latent(w_count);

    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t w = 0; w < w_count; ++w) {
        auto& idx = indices[w];
        idx.resize(parents.size());
        for (std::size_t j = 0; j < parents.size(); ++j) idx[j] = tensor.at(s, w, parents[j]);
      }
      if (!factor || !same_indices(indices, previous)) {
        factor = prepare_latent(norms[node], indices);
        previous = indices;
      }
      factor->draw(node_rng, latent);
      for (std::size_t w = 0; w < w_count; ++w) {
        const auto col = static_cast<Eigen::Index>(s * w_count + w);
        noise(col) = latent_to_noise(transport.noise, latent[w]);
        for (Eigen::Index j = 0; j < k; ++j) parent_values(j, col) = indices[w][static_cast<std::size_t>(j)];
      }
    }

    const Eigen::RowVectorXd values = evaluate_chunked(transport, noise, parent_values);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t w = 0; w < w_count; ++w) {
        tensor.at(s, w, node) =
            apply_action(worlds[w][node], values(static_cast<Eigen::Index>(s * w_count + w)));
      }
    }
  }
  return tensor;
}

double conditional_mean(const TrainedModel& model, std::size_t node, std::span<const double> parents,
                        std::size_t n, Rng& rng) {
  const auto& transport = model.transport(node);
  require_parent_arity(model, node, parents);
  if (n == 0) fail(ErrorCode::InvalidArgument, "conditional mean needs n >= 1");
  Rng local(rng.next_u64());
  Eigen::RowVectorXd noise(static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < noise.size(); ++j) noise(j) = sample_one(transport.noise, local);
  return evaluate_chunked(transport, noise, replicate_parents(parents, noise.size())).mean();
}

double conditional_quantile(const TrainedModel& model, std::size_t node,
                            std::span<const double> parents, double q) {
  const auto& transport = model.transport(node);
  require_parent_arity(model, node, parents);
  if (!(q > 0.0 && q < 1.0)) {
    fail(ErrorCode::QuantileOutOfDomain, "quantile level must lie in (0,1), got " + std::to_string(q));
  }
  return transport(quantile(transport.noise, q), parents);
}

double interventional_mean(const TrainedModel& model, std::size_t node,
                           std::span<const double> parents, const InterventionSpec& phi,
                           std::size_t n, Rng& rng) {
  require_parent_arity(model, node, parents);
  const auto moved = phi.apply_to(model.dag().parents(node), parents);
  return conditional_mean(model, node, moved, n, rng);
}

EffectEstimate interventional_effect(const TrainedModel& model, std::size_t node,
                                     std::span<const double> parents, const InterventionSpec& phi,
                                     std::size_t n, Rng& rng) {
  const auto& transport = model.transport(node);
  require_parent_arity(model, node, parents);
  if (n < 2) fail(ErrorCode::InvalidArgument, "effect estimate needs n >= 2");
  const auto moved = phi.apply_to(model.dag().parents(node), parents);
  Rng local(rng.next_u64());
  const auto cols = static_cast<Eigen::Index>(n);
  Eigen::RowVectorXd noise(cols);
  for (Eigen::Index j = 0; j < cols; ++j) noise(j) = sample_one(transport.noise, local);
  const Eigen::RowVectorXd base = evaluate_chunked(transport, noise, replicate_parents(parents, cols));
  const Eigen::RowVectorXd after = evaluate_chunked(transport, noise, replicate_parents(moved, cols));
  const Eigen::ArrayXd diff = (after - base).transpose().array();
  const double mean = diff.mean();
  const double var = (diff - mean).square().sum() / static_cast<double>(n - 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

std::vector<std::pair<double, double>> paired_effect_samples(
    const TrainedModel& model, std::size_t node, std::span<const double> parents,
    const InterventionSpec& phi1, const InterventionSpec& phi2, const NormalizationSpec& norm,
    std::size_t n, Rng& rng) {
  const auto& transport = model.transport(node);
  require_parent_arity(model, node, parents);
  const auto& pa = model.dag().parents(node);
  const std::vector<std::vector<double>> indices = {phi1.apply_to(pa, parents),
                                                    phi2.apply_to(pa, parents)};
  const LatentFactor factor = prepare_latent(norm, indices);
  Rng local(rng.next_u64());
  const auto cols = static_cast<Eigen::Index>(n);
  Eigen::RowVectorXd e1(cols), e2(cols);
  std::vector<double> latent(2);
  for (Eigen::Index j = 0; j < cols; ++j) {
    factor.draw(local, latent);
    e1(j) = latent[0];
    e2(j) = latent[1];
  }
  for (Eigen::Index j = 0; j < cols; ++j) {
    e1(j) = latent_to_noise(transport.noise, e1(j));
    e2(j) = latent_to_noise(transport.noise, e2(j));
  }
  const Eigen::RowVectorXd y1 = evaluate_chunked(transport, e1, replicate_parents(indices[0], cols));
  const Eigen::RowVectorXd y2 = evaluate_chunked(transport, e2, replicate_parents(indices[1], cols));
  std::vector<std::pair<double, double>> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = {y1(static_cast<Eigen::Index>(j)), y2(static_cast<Eigen::Index>(j))};
  }
  return out;
}

double ShiftRegressor::predict(double y0) const {
  Eigen::RowVectorXd in(1);
  in(0) = y0;
  return predict(in)(0);
}

Eigen::RowVectorXd ShiftRegressor::predict(const Eigen::RowVectorXd& y0) const {
  const Eigen::MatrixXd scaled = input_scaler.scale(y0);
  const Eigen::RowVectorXd h = evaluate_batch(net, scaled);
  return y0 + (h.array() * residual_scaler.sd(0) + residual_scaler.mean(0)).matrix();
}

ShiftRegressor fit_shift_regressor(std::span<const double> y0, std::span<const double> y1,
                                   const SecondaryConfig& config, Rng& rng) {
  if (y0.size() != y1.size()) fail(ErrorCode::LengthMismatch, "regressor inputs differ in length");
  if (y0.empty()) fail(ErrorCode::EmptySample, "regressor needs samples");
  if (config.epochs == 0 || config.batch_size == 0 || config.width == 0 || config.hidden_layers == 0) {
    fail(ErrorCode::ConfigError, "secondary regressor settings must be positive");
  }
  const auto n = static_cast<Eigen::Index>(y0.size());
  Eigen::MatrixXd x_raw(n, 1), r_raw(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    x_raw(i, 0) = y0[static_cast<std::size_t>(i)];
    r_raw(i, 0) = y1[static_cast<std::size_t>(i)] - y0[static_cast<std::size_t>(i)];
  }

  ShiftRegressor reg;
  reg.input_scaler = ScalerParams::fit(x_raw);
  reg.residual_scaler = ScalerParams::fit(r_raw);
  const Eigen::RowVectorXd x = reg.input_scaler.scale(x_raw.transpose()).row(0);
  const Eigen::RowVectorXd t = reg.residual_scaler.scale(r_raw.transpose()).row(0);

  Rng init_rng = rng.split(11);
  Rng shuffle_rng = rng.split(12);
  reg.net = init_mlp({1, config.hidden_layers, config.width, false}, init_rng);
  reg.net.layers().back().raw.setZero();
  AdamState adam = AdamState::for_net(reg.net, config.learning_rate);

  std::vector<std::size_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[shuffle_rng.uniform_index(i)]);
    for (std::size_t begin = 0; begin < perm.size(); begin += config.batch_size) {
      const std::size_t end = std::min(perm.size(), begin + config.batch_size);
      const auto b = static_cast<Eigen::Index>(end - begin);
      Eigen::MatrixXd bx(1, b);
      Eigen::RowVectorXd bt(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto row = static_cast<Eigen::Index>(perm[begin + static_cast<std::size_t>(i)]);
        bx(0, i) = x(row);
        bt(i) = t(row);
      }
      ForwardCache cache;
      try {
        cache = forward_batch(reg.net, bx);
      } catch (const Error& e) {
        fail(ErrorCode::SecondaryFitDiverged, std::string("epoch ") + std::to_string(epoch) + ": " + e.what());
      }
      const Eigen::RowVectorXd resid = cache.output - bt;
      if (!resid.allFinite()) fail(ErrorCode::SecondaryFitDiverged, "non-finite regression loss");
      adam_step(reg.net, backward(reg.net, cache, (2.0 / static_cast<double>(b)) * resid), adam);
    }
  }
  return reg;
}

std::vector<QuantileEffectPoint> quantile_effect_curve(
    const TrainedModel& model, std::size_t node, const InterventionSpec& world0,
    const InterventionSpec& world1, const NormalizationSpec& norm, std::span<const double> qs,
    std::size_t n, Rng& rng, const RowSource& rows, const SecondaryConfig& secondary) {
  model.modeled(node);
  if (n < 2) fail(ErrorCode::InvalidArgument, "quantile effect needs n >= 2");
  if (secondary.replications == 0) fail(ErrorCode::ConfigError, "need at least one replication");
  for (double q : qs) {
    if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::QuantileOutOfDomain, "quantile level outside [0,1]");
  }
  const WorldSet worlds({world0, world1});
  const auto norms = uniform_norms(model, norm);
  Rng local(rng.next_u64());

  const std::size_t reps = secondary.replications;
  std::vector<std::vector<double>> effects(qs.size(), std::vector<double>(reps));
  for (std::size_t r = 0; r < reps; ++r) {
    Rng sample_rng = local.split(2 * r);
    Rng fit_rng = local.split(2 * r + 1);
    const WorldTensor tensor = sample_counterfactual(model, worlds, norms, sample_rng, n, rows);
    const auto y0 = tensor.slice(0, node);
    const auto y1 = tensor.slice(1, node);
    const ShiftRegressor reg = fit_shift_regressor(y0, y1, secondary, fit_rng);
    const Dist1D g0 = make_empirical(y0);
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const double level = quantile(g0, qs[i]);
      effects[i][r] = reg.predict(level) - level;
    }
  }

  std::vector<QuantileEffectPoint> curve;
  curve.reserve(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto& e = effects[i];
    const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(reps);
    double se = 0.0;
    if (reps > 1) {
      double ss = 0.0;
      for (double v : e) ss += (v - mean) * (v - mean);
      se = std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps));
    }
    curve.push_back({qs[i], mean, se});
  }
  return curve;
}

Eigen::MatrixXd individual_curves(const TrainedModel& model, std::size_t node,
                                  std::span<const double> parents, std::size_t parent_slot,
                                  std::span<const double> grid, const NormalizationSpec& norm,
                                  std::size_t individuals, Rng& rng) {
  const auto& transport = model.transport(node);
  require_parent_arity(model, node, parents);
  if (parent_slot >= parents.size()) fail(ErrorCode::IndexOutOfRange, "grid parent out of range");
  const auto k_worlds = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd curves(static_cast<Eigen::Index>(individuals), k_worlds);
  if (individuals == 0 || grid.empty()) return curves;

  std::vector<std::vector<double>> indices(grid.size(), std::vector<double>(parents.begin(), parents.end()));
  for (std::size_t g = 0; g < grid.size(); ++g) indices[g][parent_slot] = grid[g];
  const LatentFactor factor = prepare_latent(norm, indices);

  Rng local(rng.next_u64());
  const Eigen::Index total = static_cast<Eigen::Index>(individuals) * k_worlds;
  Eigen::RowVectorXd noise(total);
  Eigen::MatrixXd parent_values(static_cast<Eigen::Index>(parents.size()), total);
  std::vector<double> latent(grid.size());
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    factor.draw(local, latent);
    for (Eigen::Index g = 0; g < k_worlds; ++g) {
      const Eigen::Index col = i * k_worlds + g;
      noise(col) = latent_to_noise(transport.noise, latent[static_cast<std::size_t>(g)]);
      for (std::size_t j = 0; j < parents.size(); ++j) {
        parent_values(static_cast<Eigen::Index>(j), col) = indices[static_cast<std::size_t>(g)][j];
      }
    }
  }
  const Eigen::RowVectorXd values = evaluate_chunked(transport, noise, parent_values);
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    for (Eigen::Index g = 0; g < k_worlds; ++g) curves(i, g) = values(i * k_worlds + g);
  }
  return curves;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::LengthMismatch, "spearman needs paired samples");
  if (a.size() < 2) fail(ErrorCode::InsufficientData, "spearman needs at least two pairs");
  auto ranks = [](std::span<const double> v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace ctfkit
