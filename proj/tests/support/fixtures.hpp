#pragma once

#include <vector>

#include "ctfkit/causal_graph.hpp"
#include "ctfkit/engine.hpp"
#include "ctfkit/monotone_net.hpp"

namespace fixture {

// Transport y = a*e + sum_j b_j x_j + c with identity scalers. The hidden
// pair ReLU + reflected ReLU adds back to the identity.
inline ctfkit::MonotoneTransport linear_transport(double a, std::vector<double> b, double c) {
  using namespace ctfkit;
  const auto k = static_cast<Eigen::Index>(b.size());
  ConstrainedLinear hidden;
  hidden.raw.resize(2, k + 1);
  for (Eigen::Index r = 0; r < 2; ++r) {
    hidden.raw(r, 0) = a;
    for (Eigen::Index j = 0; j < k; ++j) hidden.raw(r, j + 1) = b[static_cast<std::size_t>(j)];
  }
  hidden.bias = Eigen::VectorXd::Constant(2, c);
  std::vector<int> iota(static_cast<std::size_t>(k + 1), 0);
  iota[0] = 1;
  hidden.iota = MonotoneIndicator(iota);

  ConstrainedLinear out;
  out.raw = Eigen::MatrixXd::Ones(1, 2);
  out.bias = Eigen::VectorXd::Zero(1);
  out.iota = MonotoneIndicator::all(2, 1);

  MonotoneTransport t;
  t.net = MonotoneMlp({hidden, out}, {ActivationSplit{1, 1, 0}});
  t.input_scaler.mean = Eigen::VectorXd::Zero(k);
  t.input_scaler.sd = Eigen::VectorXd::Ones(k);
  t.output_scaler.mean = Eigen::VectorXd::Zero(1);
  t.output_scaler.sd = Eigen::VectorXd::Ones(1);
  return t;
}

// x (data source) -> y = e + slope * x.
inline ctfkit::TrainedModel linear_xy(double slope = 2.0) {
  using namespace ctfkit;
  const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}};
  Dag dag = validate_dag(edges, 2, {"x", "y"});
  std::vector<NodeKind> kinds = {DataSourceNode{}, ModeledNode{linear_transport(1.0, {slope}, 0.0), {}}};
  return TrainedModel(std::move(dag), std::move(kinds));
}

// Modeled chain a -> b -> c with a = e, b = e + a, c = 2e + b - 1.
inline ctfkit::TrainedModel linear_chain() {
  using namespace ctfkit;
  const std::vector<std::pair<std::size_t, std::size_t>> edges = {{0, 1}, {1, 2}};
  Dag dag = validate_dag(edges, 3, {"a", "b", "c"});
  std::vector<NodeKind> kinds = {ModeledNode{linear_transport(1.0, {}, 0.0), {}},
                                 ModeledNode{linear_transport(1.0, {1.0}, 0.0), {}},
                                 ModeledNode{linear_transport(2.0, {1.0}, -1.0), {}}};
  return TrainedModel(std::move(dag), std::move(kinds));
}

inline ctfkit::InterventionSpec do_set(std::size_t n_vars, std::size_t var, double value) {
  ctfkit::InterventionSpec w(n_vars);
  w.set(var, ctfkit::SetConstant{value});
  return w;
}

}  // namespace fixture
