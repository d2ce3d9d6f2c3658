#include "ctfkit/serialize.hpp"

#include <cmath>
#include <limits>

#include "ctfkit/config.hpp"
#include "ctfkit/data_io.hpp"
#include "ctfkit/error.hpp"

namespace ctfkit {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index expect_cols = -1) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  if (rows == 0 && expect_cols >= 0) cols = expect_cols;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) fail(ErrorCode::ConfigError, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double bound_from_json(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

// Runs `fn`, turning nlohmann exceptions into ConfigError.
template <class F>
auto guarded(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string(what) + ": " + e.what());
  }
}

json scaler_to_json(const ScalerParams& s) {
  return json{{"mean", vector_to_json(s.mean)}, {"sd", vector_to_json(s.sd)}};
}

ScalerParams scaler_from_json(const json& j) {
  ScalerParams s;
  s.mean = vector_from_json(j.at("mean"));
  s.sd = vector_from_json(j.at("sd"));
  if (s.mean.size() != s.sd.size()) fail(ErrorCode::CorruptFile, "scaler mean/sd length differ");
  return s;
}

json net_to_json(const MonotoneMlp& net) {
  json layers = json::array();
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const auto& layer = net.layers()[l];
    json jl{{"raw", matrix_to_json(layer.raw)},
            {"bias", vector_to_json(layer.bias)},
            {"iota", layer.iota.entries()}};
    if (l < net.splits().size()) {
      const auto& s = net.splits()[l];
      jl["split"] = {s.breve, s.hat, s.tilde};
    }
    layers.push_back(std::move(jl));
  }
  return layers;
}

MonotoneMlp net_from_json(const json& j) {
  std::vector<ConstrainedLinear> layers;
  std::vector<ActivationSplit> splits;
  for (const auto& jl : j) {
    ConstrainedLinear layer;
    layer.iota = MonotoneIndicator(jl.at("iota").get<std::vector<int>>());
    layer.raw = matrix_from_json(jl.at("raw"), static_cast<Eigen::Index>(layer.iota.size()));
    layer.bias = vector_from_json(jl.at("bias"));
    layers.push_back(std::move(layer));
    if (jl.contains("split")) {
      const auto s = jl.at("split").get<std::vector<std::size_t>>();
      if (s.size() != 3) fail(ErrorCode::CorruptFile, "activation split needs three counts");
      splits.push_back({s[0], s[1], s[2]});
    }
  }
  if (layers.empty()) fail(ErrorCode::CorruptFile, "network has no layers");
  return MonotoneMlp(std::move(layers), std::move(splits));
}

}  // namespace

json dist_to_json(const Dist1D& dist) {
  return std::visit(
      [](const auto& d) -> json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Normal>) return {{"kind", "normal"}, {"mean", d.mean}, {"sd", d.sd}};
        if constexpr (std::is_same_v<T, Laplace>) {
          return {{"kind", "laplace"}, {"mean", d.mean}, {"scale", d.scale}};
        }
        if constexpr (std::is_same_v<T, Uniform>) return {{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
        if constexpr (std::is_same_v<T, EmpiricalSorted>) return {{"kind", "empirical"}, {"values", d.values}};
      },
      dist);
}

Dist1D dist_from_json(const json& j) {
  return guarded("distribution", [&]() -> Dist1D {
    if (j.is_string()) {
      const auto kind = j.get<std::string>();
      if (kind == "normal") return Normal{};
      if (kind == "uniform") return Uniform{};
      if (kind == "laplace") return Laplace{};
      fail(ErrorCode::ConfigError, "unknown distribution '" + kind + "'");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "normal") return make_normal(j.value("mean", 0.0), j.value("sd", 1.0));
    if (kind == "laplace") return make_laplace(j.value("mean", 0.0), j.value("scale", 1.0));
    if (kind == "uniform") return make_uniform(j.value("lo", 0.0), j.value("hi", 1.0));
    if (kind == "empirical") return make_empirical(j.at("values").get<std::vector<double>>());
    fail(ErrorCode::ConfigError, "unknown distribution '" + kind + "'");
  });
}

json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"n_prime", c.n_prime},
          {"seed", c.seed},
          {"noise", dist_to_json(c.noise)},
          {"hidden_layers", c.hidden_layers},
          {"width", c.width},
          {"noise_mode", c.noise_mode == NoiseMode::Redraw ? "redraw" : "fixed"}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  return guarded("train config", [&] {
    TrainConfig c = base;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.n_prime = j.value("n_prime", c.n_prime);
    c.seed = j.value("seed", c.seed);
    c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
    c.width = j.value("width", c.width);
    if (j.contains("noise")) c.noise = dist_from_json(j.at("noise"));
    if (j.contains("noise_mode")) {
      const auto mode = j.at("noise_mode").get<std::string>();
      if (mode == "redraw") {
        c.noise_mode = NoiseMode::Redraw;
      } else if (mode == "fixed") {
        c.noise_mode = NoiseMode::Fixed;
      } else {
        fail(ErrorCode::ConfigError, "noise_mode must be 'redraw' or 'fixed'");
      }
    }
    c.validate();
    return c;
  });
}

json norm_to_json(const NormalizationSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Comonotonic>) return {{"kind", "comonotonic"}};
        if constexpr (std::is_same_v<T, Countermonotonic>) return {{"kind", "countermonotonic"}};
        if constexpr (std::is_same_v<T, Independent>) return {{"kind", "independent"}};
        if constexpr (std::is_same_v<T, GaussianKernel>) return {{"kind", "gaussian"}, {"sigma", s.sigma}};
        if constexpr (std::is_same_v<T, CorrMatrix>) return {{"kind", "corr"}, {"matrix", matrix_to_json(s.matrix)}};
      },
      spec);
}

NormalizationSpec norm_from_json(const json& j) {
  return guarded("normalization", [&]() -> NormalizationSpec {
    if (j.is_string()) return parse_norm(j.get<std::string>());
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "comonotonic") return Comonotonic{};
    if (kind == "countermonotonic") return Countermonotonic{};
    if (kind == "independent") return Independent{};
    if (kind == "gaussian") return make_gaussian(j.at("sigma").get<double>());
    if (kind == "corr") return make_corr(matrix_from_json(j.at("matrix")));
    fail(ErrorCode::ConfigError, "unknown normalization kind '" + kind + "'");
  });
}

json action_to_json(const VarAction& action) {
  return std::visit(
      [](const auto& a) -> json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Identity>) return {{"kind", "identity"}};
        if constexpr (std::is_same_v<T, SetConstant>) return {{"kind", "set"}, {"value", a.value}};
        if constexpr (std::is_same_v<T, Shift>) return {{"kind", "shift"}, {"delta", a.delta}};
        if constexpr (std::is_same_v<T, ShiftClip>) {
          return {{"kind", "shift_clip"}, {"delta", a.delta}, {"lo", bound_to_json(a.lo)}, {"hi", bound_to_json(a.hi)}};
        }
      },
      action);
}

VarAction action_from_json(const json& j) {
  return guarded("action", [&]() -> VarAction {
    if (j.is_number()) return SetConstant{j.get<double>()};
    const auto kind = j.at("kind").get<std::string>();
    VarAction action;
    if (kind == "identity") {
      action = Identity{};
    } else if (kind == "set") {
      action = SetConstant{j.at("value").get<double>()};
    } else if (kind == "shift") {
      action = Shift{j.at("delta").get<double>()};
    } else if (kind == "shift_clip") {
      action = ShiftClip{j.at("delta").get<double>(), bound_from_json(j, "lo", -kInf), bound_from_json(j, "hi", kInf)};
    } else {
      fail(ErrorCode::ConfigError, "unknown action kind '" + kind + "'");
    }
    validate_action(action);
    return action;
  });
}

json world_to_json(const InterventionSpec& world, const Dag& dag) {
  json out = json::object();
  for (std::size_t v = 0; v < world.size(); ++v) {
    if (!is_identity(world[v])) out[dag.name(v)] = action_to_json(world[v]);
  }
  return out;
}

InterventionSpec world_from_json(const json& j, const Dag& dag) {
  return guarded("world", [&] {
    if (j.is_string()) return parse_world(j.get<std::string>(), dag);
    if (!j.is_object()) fail(ErrorCode::ConfigError, "a world is an object or a string");
    InterventionSpec world(dag.n_vars());
    for (const auto& [name, action] : j.items()) world.set(dag.index_of(name), action_from_json(action));
    return world;
  });
}

json model_to_json(const TrainedModel& model) {
  const Dag& dag = model.dag();
  json edges = json::array();
  for (const auto& [p, c] : dag.edges()) edges.push_back({p, c});
  json nodes = json::array();
  for (std::size_t v = 0; v < dag.n_vars(); ++v) {
    if (!model.is_modeled(v)) {
      nodes.push_back({{"kind", "data"}});
      continue;
    }
    const ModeledNode& m = model.modeled(v);
    nodes.push_back({{"kind", "modeled"},
                     {"noise", dist_to_json(m.transport.noise)},
                     {"train", train_config_to_json(m.config)},
                     {"input_scaler", scaler_to_json(m.transport.input_scaler)},
                     {"output_scaler", scaler_to_json(m.transport.output_scaler)},
                     {"layers", net_to_json(m.transport.net)}});
  }
  return {{"format", "ctfkit-model"},
          {"format_version", kModelFormatVersion},
          {"names", dag.names()},
          {"edges", std::move(edges)},
          {"provenance", {{"config_hash", model.provenance().config_hash}, {"seed", model.provenance().seed}}},
          {"nodes", std::move(nodes)}};
}

TrainedModel model_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != "ctfkit-model") {
      fail(ErrorCode::CorruptFile, "not a ctfkit model file");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      fail(ErrorCode::FormatVersionMismatch, "model format version " + std::to_string(version) +
                                                 ", this build reads " + std::to_string(kModelFormatVersion));
    }
    auto names = j.at("names").get<std::vector<std::string>>();
    const auto edge_list = j.at("edges").get<std::vector<std::pair<std::size_t, std::size_t>>>();
    const std::size_t d = names.size();
    Dag dag = validate_dag(edge_list, d, std::move(names));

    const json& jn = j.at("nodes");
    if (jn.size() != d) fail(ErrorCode::CorruptFile, "node count differs from variable count");
    std::vector<NodeKind> kinds;
    for (const auto& node : jn) {
      const auto kind = node.at("kind").get<std::string>();
      if (kind == "data") {
        kinds.emplace_back(DataSourceNode{});
      } else if (kind == "modeled") {
        ModeledNode m;
        m.transport.noise = dist_from_json(node.at("noise"));
        m.config = train_config_from_json(node.at("train"));
        m.transport.input_scaler = scaler_from_json(node.at("input_scaler"));
        m.transport.output_scaler = scaler_from_json(node.at("output_scaler"));
        m.transport.net = net_from_json(node.at("layers"));
        kinds.emplace_back(std::move(m));
      } else {
        fail(ErrorCode::CorruptFile, "unknown node kind '" + kind + "'");
      }
    }
    Provenance prov;
    if (j.contains("provenance")) {
      prov.config_hash = j.at("provenance").value("config_hash", "");
      prov.seed = j.at("provenance").value("seed", std::uint64_t{0});
    }
    return TrainedModel(std::move(dag), std::move(kinds), std::move(prov));
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("model file: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::FormatVersionMismatch || e.code() == ErrorCode::CorruptFile) throw;
    fail(ErrorCode::CorruptFile, "model file: " + std::string(e.code_name()) + ": " + e.what());
  }
}

}  // namespace ctfkit
