#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ctfkit/causal_graph.hpp"
#include "ctfkit/dataset.hpp"
#include "ctfkit/engine.hpp"
#include "ctfkit/mmd_trainer.hpp"
#include "ctfkit/normalization.hpp"

namespace ctfkit {

inline constexpr int kConfigVersion = 1;

/// Model config file:
///   {"version": 1, "names": ["x", "y"], "edges": [[0, 1]], "seed": 7,
///    "train": {...defaults...},
///    "nodes": {"x": {"kind": "data"}, "y": {"kind": "modeled", "train": {...}}}}
/// Edges may use indices or names. Unlisted nodes are data sources when they
/// have no parents and modeled otherwise.
struct ModelConfig {
  Dag dag;
  std::vector<bool> modeled;
  std::vector<TrainConfig> train;  // per variable, meaningful when modeled
  std::uint64_t seed = 0;
  std::string hash;  // of the config text
};

ModelConfig parse_model_config(std::string_view text);
ModelConfig load_model_config(const std::string& path);

struct NodeReport {
  std::size_t node = 0;
  TrainReport report;
};

struct TrainedBundle {
  TrainedModel model;
  std::vector<NodeReport> reports;
};

/// Fits every modeled node in topological order. Columns are matched by
/// variable name. Errors are rethrown with the node name prepended.
TrainedBundle train_model(const ModelConfig& config, const Dataset& data,
                          const std::function<void(std::size_t, const TrainReport&)>& on_node = {});

/// comonotonic | countermonotonic | independent | gaussian:<sigma> | corr:<path>
/// A leading '{' is read as the JSON form.
NormalizationSpec parse_norm(std::string_view text);

/// "identity", or ';'-separated terms over variable names (or indices):
///   x=4        set
///   x+=1       shift (x-=1 shifts down)
///   x+=1[:10]  shift then clip to [lo, hi]; an empty bound is unbounded
InterventionSpec parse_world(std::string_view text, const Dag& dag);

/// "a:b:step" (inclusive of b up to rounding) or a comma list.
std::vector<double> parse_grid(std::string_view text);
/// Comma list of numbers.
std::vector<double> parse_list(std::string_view text);

}  // namespace ctfkit
