#pragma once

#include <nlohmann/json.hpp>

#include "ctfkit/causal_graph.hpp"
#include "ctfkit/distributions.hpp"
#include "ctfkit/engine.hpp"
#include "ctfkit/mmd_trainer.hpp"
#include "ctfkit/normalization.hpp"

// JSON forms shared by the model file, config files and the HTTP service.
// Readers throw ConfigError on malformed input unless noted.

namespace ctfkit {

nlohmann::json dist_to_json(const Dist1D& dist);
Dist1D dist_from_json(const nlohmann::json& j);

nlohmann::json train_config_to_json(const TrainConfig& config);
/// Fields absent from `j` keep their value from `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// {"kind": "gaussian", "sigma": 2}, {"kind": "corr", "matrix": [[...]]}, ...
nlohmann::json norm_to_json(const NormalizationSpec& spec);
NormalizationSpec norm_from_json(const nlohmann::json& j);

/// {"kind": "set", "value": 4}, {"kind": "shift", "delta": 1},
/// {"kind": "shift_clip", "delta": 1, "lo": 0, "hi": 10}, {"kind": "identity"}
nlohmann::json action_to_json(const VarAction& action);
VarAction action_from_json(const nlohmann::json& j);

/// Object keyed by variable name; unlisted variables are left alone. A
/// string is read with the world grammar of parse_world.
nlohmann::json world_to_json(const InterventionSpec& world, const Dag& dag);
InterventionSpec world_from_json(const nlohmann::json& j, const Dag& dag);

nlohmann::json model_to_json(const TrainedModel& model);
/// Throws FormatVersionMismatch or CorruptFile.
TrainedModel model_from_json(const nlohmann::json& j);

}  // namespace ctfkit
