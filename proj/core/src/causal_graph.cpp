#include "ctfkit/causal_graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "ctfkit/error.hpp"

namespace ctfkit {
namespace {

// Walks parent links from a node left over by Kahn's algorithm. Every such
// node has a remaining parent, so the walk must revisit a node.
std::vector<std::size_t> find_cycle(const std::vector<std::vector<std::size_t>>& parents,
                                    const std::vector<std::size_t>& indegree) {
  std::size_t start = 0;
  while (indegree[start] == 0) ++start;
  std::vector<int> seen_at(parents.size(), -1);
  std::vector<std::size_t> walk;
  std::size_t v = start;
  while (seen_at[v] < 0) {
    seen_at[v] = static_cast<int>(walk.size());
    walk.push_back(v);
    for (std::size_t p : parents[v]) {
      if (indegree[p] > 0) {
        v = p;
        break;
      }
    }
  }
  std::vector<std::size_t> cycle(walk.begin() + seen_at[v], walk.end());
  std::reverse(cycle.begin(), cycle.end());
  return cycle;
}

std::vector<std::size_t> kahn(const std::vector<std::vector<std::size_t>>& parents,
                              std::vector<std::size_t>& indegree) {
  const std::size_t n = parents.size();
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t c = 0; c < n; ++c) {
    indegree[c] = parents[c].size();
    for (std::size_t p : parents[c]) children[p].push_back(c);
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    order.push_back(v);
    for (std::size_t c : children[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  return order;
}

}  // namespace

std::size_t Dag::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) fail(ErrorCode::IndexOutOfRange, "unknown variable '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<std::pair<std::size_t, std::size_t>> Dag::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < parents_.size(); ++c) {
    for (std::size_t p : parents_[c]) out.emplace_back(p, c);
  }
  return out;
}

Dag validate_dag(std::span<const std::pair<std::size_t, std::size_t>> edges, std::size_t n_vars,
                 std::vector<std::string> names) {
  if (n_vars == 0) fail(ErrorCode::InvalidArgument, "a graph needs at least one variable");
  if (names.empty()) {
    for (std::size_t i = 0; i < n_vars; ++i) names.push_back("v" + std::to_string(i));
  }
  if (names.size() != n_vars) {
    fail(ErrorCode::LengthMismatch, "expected " + std::to_string(n_vars) + " names, got " +
                                        std::to_string(names.size()));
  }
  for (std::size_t i = 0; i < n_vars; ++i) {
    if (std::find(names.begin(), names.begin() + static_cast<long>(i), names[i]) !=
        names.begin() + static_cast<long>(i)) {
      fail(ErrorCode::InvalidArgument, "duplicate variable name '" + names[i] + "'");
    }
  }

  std::vector<std::vector<std::size_t>> parents(n_vars);
  for (auto [p, c] : edges) {
    if (p >= n_vars || c >= n_vars) {
      fail(ErrorCode::IndexOutOfRange, "edge (" + std::to_string(p) + "," + std::to_string(c) +
                                           ") outside [0," + std::to_string(n_vars) + ")");
    }
    auto& list = parents[c];
    if (std::find(list.begin(), list.end(), p) != list.end()) {
      fail(ErrorCode::IndexOutOfRange, "duplicate edge (" + std::to_string(p) + "," +
                                           std::to_string(c) + ")");
    }
    list.push_back(p);
  }

  std::vector<std::size_t> indegree(n_vars);
  if (kahn(parents, indegree).size() != n_vars) {
    const auto cycle = find_cycle(parents, indegree);
    std::ostringstream msg;
    msg << "cycle ";
    for (std::size_t v : cycle) msg << names[v] << " -> ";
    msg << names[cycle.front()];
    fail(ErrorCode::CycleDetected, msg.str());
  }

  Dag dag;
  dag.parents_ = std::move(parents);
  dag.names_ = std::move(names);
  return dag;
}

std::vector<std::size_t> topological_order(const Dag& dag) {
  std::vector<std::vector<std::size_t>> parents(dag.n_vars());
  for (std::size_t v = 0; v < dag.n_vars(); ++v) parents[v] = dag.parents(v);
  std::vector<std::size_t> indegree(dag.n_vars());
  return kahn(parents, indegree);
}

void validate_action(const VarAction& action) {
  std::visit(
      [](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SetConstant>) {
          if (std::isnan(a.value)) fail(ErrorCode::InvalidArgument, "set value is NaN");
        } else if constexpr (std::is_same_v<T, Shift>) {
          if (!std::isfinite(a.delta)) fail(ErrorCode::InvalidArgument, "shift must be finite");
        } else if constexpr (std::is_same_v<T, ShiftClip>) {
          if (!std::isfinite(a.delta)) fail(ErrorCode::InvalidArgument, "shift must be finite");
          if (std::isnan(a.lo) || std::isnan(a.hi) || a.lo > a.hi) {
            fail(ErrorCode::InvalidArgument, "shift-clip requires lo <= hi");
          }
        }
      },
      action);
}

double apply_action(const VarAction& action, double v) {
  return std::visit(
      [v](const auto& a) -> double {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Identity>) {
          return v;
        } else if constexpr (std::is_same_v<T, SetConstant>) {
          return a.value;
        } else if constexpr (std::is_same_v<T, Shift>) {
          return v + a.delta;
        } else {
          return std::clamp(v + a.delta, a.lo, a.hi);
        }
      },
      action);
}

bool is_identity(const VarAction& action) noexcept {
  return std::holds_alternative<Identity>(action);
}

InterventionSpec::InterventionSpec(std::vector<VarAction> actions) : actions_(std::move(actions)) {
  for (const auto& a : actions_) validate_action(a);
}

void InterventionSpec::set(std::size_t var, VarAction action) {
  if (var >= actions_.size()) {
    fail(ErrorCode::IndexOutOfRange, "intervention on variable " + std::to_string(var) +
                                         " outside [0," + std::to_string(actions_.size()) + ")");
  }
  validate_action(action);
  actions_[var] = action;
}

std::vector<double> InterventionSpec::apply_to(std::span<const std::size_t> vars,
                                               std::span<const double> values) const {
  if (vars.size() != values.size()) {
    fail(ErrorCode::LengthMismatch, "variable and value lists differ in length");
  }
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < vars.size(); ++k) out[k] = apply_action((*this)[vars[k]], values[k]);
  return out;
}

WorldSet::WorldSet(std::vector<InterventionSpec> worlds) : worlds_(std::move(worlds)) {
  if (worlds_.empty()) fail(ErrorCode::InvalidArgument, "a world set needs at least one world");
  for (const auto& w : worlds_) {
    if (w.size() != worlds_.front().size()) {
      fail(ErrorCode::LengthMismatch, "worlds reference different variable counts");
    }
  }
}

}  // namespace ctfkit
