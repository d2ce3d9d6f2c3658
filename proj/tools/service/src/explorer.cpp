#include "ctfkit/explorer.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include <nlohmann/json.hpp>

#include "ctfkit/config.hpp"
#include "ctfkit/error.hpp"
#include "ctfkit/serialize.hpp"

namespace ctfkit {
namespace {

using nlohmann::json;

enum EndpointTag : std::uint64_t { kCouplingTag = 1, kCurvesTag = 2, kEffectTag = 3 };

json error_body(std::string_view code, std::string_view message) {
  return json{{"error_code", code}, {"message", message}};
}

std::size_t variable_of(const json& j, const Dag& dag) {
  if (j.is_number_integer()) {
    const auto idx = j.get<long long>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= dag.n_vars()) {
      fail(ErrorCode::IndexOutOfRange, "variable index " + std::to_string(idx) + " out of range");
    }
    return static_cast<std::size_t>(idx);
  }
  const auto name = j.get<std::string>();
  for (std::size_t v = 0; v < dag.n_vars(); ++v) {
    if (dag.name(v) == name) return v;
  }
  fail(ErrorCode::UsageError, "unknown variable '" + name + "'");
}

std::size_t default_node(const TrainedModel& model) {
  const auto& order = model.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (model.is_modeled(*it)) return *it;
  }
  fail(ErrorCode::NodeNotModeled, "model has no modeled node");
}

std::size_t node_of(const json& req, const TrainedModel& model) {
  const std::size_t node = req.contains("node") ? variable_of(req.at("node"), model.dag()) : default_node(model);
  model.modeled(node);
  return node;
}

std::vector<InterventionSpec> worlds_of(const json& req, const Dag& dag) {
  std::vector<InterventionSpec> worlds;
  for (const auto& w : req.at("worlds")) worlds.push_back(world_from_json(w, dag));
  return worlds;
}

std::size_t capped_n(const json& req, const char* key, std::size_t fallback, std::size_t cap) {
  const long long n = req.value(key, static_cast<long long>(fallback));
  if (n < 0) fail(ErrorCode::UsageError, std::string(key) + " must be non-negative");
  if (static_cast<std::size_t>(n) > cap) {
    fail(ErrorCode::RequestTooLarge,
         std::string(key) + " = " + std::to_string(n) + " exceeds the limit " + std::to_string(cap));
  }
  return static_cast<std::size_t>(n);
}

std::string dump(const json& j) { return j.dump(); }

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RequestTooLarge:
      return 413;
    case ErrorCode::NonFiniteOutput:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::SecondaryFitDiverged:
    case ErrorCode::CholeskyFailed:
    case ErrorCode::IoError:
    case ErrorCode::CorruptFile:
    case ErrorCode::FormatVersionMismatch:
    case ErrorCode::AddressInUse:
      return 500;
    default:
      return 400;
  }
}

ExplorerService::ExplorerService(std::shared_ptr<const TrainedModel> model, std::optional<Dataset> data,
                                 ExplorerLimits limits)
    : model_(std::move(model)), data_(std::move(data)), limits_(limits) {
  if (!model_) fail(ErrorCode::InvalidArgument, "explorer needs a model");
}

HttpResponse ExplorerService::handle(std::string_view method, std::string_view path, std::string_view body) const {
  struct Route {
    std::string_view method;
    std::string_view path;
    std::string (ExplorerService::*post)(std::string_view) const;
  };
  static constexpr Route kRoutes[] = {
      {"GET", "/model/info", nullptr},
      {"POST", "/coupling", &ExplorerService::coupling},
      {"POST", "/curves", &ExplorerService::curves},
      {"POST", "/effect-curve", &ExplorerService::effect_curve},
  };
  for (const auto& route : kRoutes) {
    if (route.path != path) continue;
    if (route.method != method) {
      return {405, dump(error_body("MethodNotAllowed", std::string(path) + " expects " + std::string(route.method)))};
    }
    try {
      return {200, route.post ? (this->*route.post)(body) : model_info()};
    } catch (const Error& e) {
      return {http_status(e.code()), dump(error_body(e.code_name(), e.what()))};
    } catch (const json::exception& e) {
      return {400, dump(error_body(error_code_name(ErrorCode::UsageError), std::string("request: ") + e.what()))};
    } catch (const std::exception& e) {
      return {500, dump(error_body("Internal", e.what()))};
    }
  }
  return {404, dump(error_body("NotFound", "no route " + std::string(method) + " " + std::string(path)))};
}

std::string ExplorerService::model_info() const {
  const TrainedModel& m = *model_;
  const Dag& dag = m.dag();
  json vars = json::array();
  for (std::size_t v = 0; v < dag.n_vars(); ++v) {
    json var{{"index", v}, {"name", dag.name(v)}, {"parents", dag.parents(v)}};
    if (m.is_modeled(v)) {
      const auto& node = m.modeled(v);
      var["kind"] = "modeled";
      var["noise"] = dist_to_json(node.transport.noise);
      var["train"] = train_config_to_json(node.config);
    } else {
      var["kind"] = "data";
    }
    vars.push_back(std::move(var));
  }
  json edges = json::array();
  for (const auto& [from, to] : dag.edges()) edges.push_back({from, to});
  return dump(json{{"d", dag.n_vars()},
                   {"variables", std::move(vars)},
                   {"edges", std::move(edges)},
                   {"provenance", {{"config_hash", m.provenance().config_hash}, {"seed", m.provenance().seed}}},
                   {"has_data", data_.has_value()},
                   {"limits", {{"max_n", limits_.max_n}, {"max_replications", limits_.max_replications}}}});
}

namespace {

// "row": absent (no rows), "resample", {"index": k} or {"values": {"x": 1.5}}.
RowSource rows_of(const json& req, const TrainedModel& model, const std::optional<Dataset>& data) {
  if (!req.contains("row") || req.at("row").is_null()) return RowSource::none();
  const json& row = req.at("row");
  const auto need_data = [&]() -> const Dataset& {
    if (!data) fail(ErrorCode::MissingRowSource, "the server was started without a dataset");
    return *data;
  };
  if (row.is_string()) {
    if (row.get<std::string>() != "resample") fail(ErrorCode::UsageError, "row must be \"resample\" or an object");
    return RowSource::resample(need_data(), model.dag());
  }
  if (row.contains("index")) return RowSource::fixed_from(need_data(), model.dag(), row.at("index").get<std::size_t>());
  std::vector<double> values(model.n_vars(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& [name, value] : row.at("values").items()) {
    values[variable_of(json(name), model.dag())] = value.get<double>();
  }
  return RowSource::fixed(std::move(values));
}

}  // namespace

std::string ExplorerService::coupling(std::string_view body) const {
  const json req = json::parse(body);
  const TrainedModel& m = *model_;
  const auto worlds = worlds_of(req, m.dag());
  if (worlds.size() != 2) {
    fail(ErrorCode::WrongWorldCount, "coupling needs exactly 2 worlds, got " + std::to_string(worlds.size()));
  }
  const std::size_t node = node_of(req, m);
  const std::size_t n = capped_n(req, "n", 1500, limits_.max_n);
  const NormalizationSpec norm = norm_from_json(req.value("norm", json("comonotonic")));
  Rng rng = Rng(req.value("seed", std::uint64_t{0})).split(kCouplingTag);

  const WorldTensor t =
      sample_counterfactual(m, WorldSet(worlds), uniform_norms(m, norm), rng, n, rows_of(req, m, data_));
  const auto y0 = t.slice(0, node);
  const auto y1 = t.slice(1, node);
  json pairs = json::array();
  for (std::size_t s = 0; s < n; ++s) pairs.push_back({y0[s], y1[s]});
  return dump(json{{"node", m.dag().name(node)},
                   {"norm", describe(norm)},
                   {"n", n},
                   {"pairs", std::move(pairs)},
                   {"spearman", n >= 2 ? json(spearman(y0, y1)) : json(nullptr)}});
}

std::string ExplorerService::curves(std::string_view body) const {
  const json req = json::parse(body);
  const TrainedModel& m = *model_;
  const std::size_t node = node_of(req, m);
  const auto& parents = m.dag().parents(node);
  if (parents.empty()) fail(ErrorCode::UsageError, "node '" + m.dag().name(node) + "' has no parent to vary");

  const std::size_t varied = req.contains("parent") ? variable_of(req.at("parent"), m.dag()) : parents.front();
  std::size_t slot = parents.size();
  for (std::size_t j = 0; j < parents.size(); ++j) {
    if (parents[j] == varied) slot = j;
  }
  if (slot == parents.size()) {
    fail(ErrorCode::UsageError, "'" + m.dag().name(varied) + "' is not a parent of '" + m.dag().name(node) + "'");
  }

  std::vector<double> parent_values(parents.size(), 0.0);
  if (req.contains("parents")) {
    for (const auto& [name, value] : req.at("parents").items()) {
      const std::size_t v = variable_of(json(name), m.dag());
      bool found = false;
      for (std::size_t j = 0; j < parents.size(); ++j) {
        if (parents[j] == v) {
          parent_values[j] = value.get<double>();
          found = true;
        }
      }
      if (!found) fail(ErrorCode::UsageError, "'" + name + "' is not a parent of '" + m.dag().name(node) + "'");
    }
  }

  const json& grid_json = req.at("grid");
  const std::vector<double> grid =
      grid_json.is_string() ? parse_grid(grid_json.get<std::string>()) : grid_json.get<std::vector<double>>();
  const std::size_t individuals = capped_n(req, "individuals", 10, limits_.max_n);
  if (individuals * grid.size() > limits_.max_n) {
    fail(ErrorCode::RequestTooLarge, "individuals x grid points exceeds the limit " + std::to_string(limits_.max_n));
  }
  const NormalizationSpec norm = norm_from_json(req.value("norm", json("comonotonic")));
  Rng rng = Rng(req.value("seed", std::uint64_t{0})).split(kCurvesTag);

  const Eigen::MatrixXd c = individual_curves(m, node, parent_values, slot, grid, norm, individuals, rng);
  json rows = json::array();
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index g = 0; g < c.cols(); ++g) row.push_back(c(i, g));
    rows.push_back(std::move(row));
  }
  return dump(json{{"node", m.dag().name(node)},
                   {"parent", m.dag().name(varied)},
                   {"norm", describe(norm)},
                   {"grid", grid},
                   {"curves", std::move(rows)}});
}

std::string ExplorerService::effect_curve(std::string_view body) const {
  const json req = json::parse(body);
  const TrainedModel& m = *model_;
  const auto worlds = worlds_of(req, m.dag());
  if (worlds.size() != 2) {
    fail(ErrorCode::WrongWorldCount, "effect curve needs exactly 2 worlds, got " + std::to_string(worlds.size()));
  }
  const std::size_t node = node_of(req, m);
  const std::size_t n = capped_n(req, "n", 2000, limits_.max_n);
  const NormalizationSpec norm = norm_from_json(req.value("norm", json("comonotonic")));
  const auto qs = req.value("qs", std::vector<double>{0.1, 0.25, 0.5, 0.75, 0.9});
  SecondaryConfig secondary;
  secondary.replications = capped_n(req, "replications", secondary.replications, limits_.max_replications);
  Rng rng = Rng(req.value("seed", std::uint64_t{0})).split(kEffectTag);

  const auto curve =
      quantile_effect_curve(m, node, worlds[0], worlds[1], norm, qs, n, rng, rows_of(req, m, data_), secondary);
  json points = json::array();
  for (const auto& p : curve) points.push_back({{"q", p.q}, {"effect", p.effect}, {"std_error", p.std_error}});
  return dump(json{{"node", m.dag().name(node)}, {"norm", describe(norm)}, {"points", std::move(points)}});
}

}  // namespace ctfkit
