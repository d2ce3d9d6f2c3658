#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ctfkit {

/// Directed acyclic graph over `n_vars()` variables. Parent lists keep the
/// order in which edges were declared; that order is the input layout of
/// the node's transport.
class Dag {
 public:
  Dag() = default;

  std::size_t n_vars() const noexcept { return parents_.size(); }
  const std::vector<std::size_t>& parents(std::size_t var) const { return parents_.at(var); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t var) const { return names_.at(var); }

  /// Index of the variable called `name`; throws IndexOutOfRange if absent.
  std::size_t index_of(const std::string& name) const;

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

 private:
  friend Dag validate_dag(std::span<const std::pair<std::size_t, std::size_t>>, std::size_t,
                          std::vector<std::string>);

  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::string> names_;
};

/// Builds a Dag from (parent, child) pairs. Throws IndexOutOfRange for bad
/// indices or duplicated edges and CycleDetected (naming one cycle) when no
/// topological order exists. Empty `names` defaults to "v0", "v1", ...
Dag validate_dag(std::span<const std::pair<std::size_t, std::size_t>> edges, std::size_t n_vars,
                 std::vector<std::string> names = {});

/// Kahn's algorithm; ties broken by ascending index.
std::vector<std::size_t> topological_order(const Dag& dag);

struct Identity {
  bool operator==(const Identity&) const = default;
};
struct SetConstant {
  double value;
  bool operator==(const SetConstant&) const = default;
};
struct Shift {
  double delta;
  bool operator==(const Shift&) const = default;
};
struct ShiftClip {
  double delta;
  double lo;
  double hi;
  bool operator==(const ShiftClip&) const = default;
};

using VarAction = std::variant<Identity, SetConstant, Shift, ShiftClip>;

/// Throws InvalidArgument when a ShiftClip has lo > hi or a parameter is NaN.
void validate_action(const VarAction& action);

double apply_action(const VarAction& action, double v);

bool is_identity(const VarAction& action) noexcept;

/// One action per variable.
class InterventionSpec {
 public:
  explicit InterventionSpec(std::size_t n_vars) : actions_(n_vars, Identity{}) {}
  explicit InterventionSpec(std::vector<VarAction> actions);

  std::size_t size() const noexcept { return actions_.size(); }
  const VarAction& operator[](std::size_t var) const { return actions_.at(var); }
  void set(std::size_t var, VarAction action);

  /// Applies the actions of `vars` to `values` (same length) entrywise.
  std::vector<double> apply_to(std::span<const std::size_t> vars,
                               std::span<const double> values) const;

  bool operator==(const InterventionSpec&) const = default;

 private:
  std::vector<VarAction> actions_;
};

/// Ordered collection of W >= 1 worlds over a common variable count.
class WorldSet {
 public:
  explicit WorldSet(std::vector<InterventionSpec> worlds);

  std::size_t size() const noexcept { return worlds_.size(); }
  std::size_t n_vars() const noexcept { return worlds_.front().size(); }
  const InterventionSpec& operator[](std::size_t w) const { return worlds_.at(w); }
  const std::vector<InterventionSpec>& worlds() const noexcept { return worlds_; }

 private:
  std::vector<InterventionSpec> worlds_;
};

}  // namespace ctfkit
