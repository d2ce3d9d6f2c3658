#include "ctfkit/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ctfkit/data_io.hpp"
#include "ctfkit/error.hpp"
#include "ctfkit/serialize.hpp"

namespace ctfkit {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view text, const char* what) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    fail(ErrorCode::UsageError, std::string(what) + ": '" + std::string(text) + "' is not a finite number");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::size_t variable_index(std::string_view token, const Dag& dag) {
  const std::string name(trim(token));
  for (std::size_t v = 0; v < dag.n_vars(); ++v) {
    if (dag.name(v) == name) return v;
  }
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
  if (!name.empty() && ec == std::errc() && ptr == name.data() + name.size() && idx < dag.n_vars()) return idx;
  fail(ErrorCode::UsageError, "unknown variable '" + name + "'");
}

std::size_t edge_end(const json& j, const std::vector<std::string>& names) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (std::size_t v = 0; v < names.size(); ++v) {
      if (names[v] == name) return v;
    }
    fail(ErrorCode::ConfigError, "edge names unknown variable '" + name + "'");
  }
  const auto idx = j.get<long long>();
  if (idx < 0) fail(ErrorCode::IndexOutOfRange, "negative edge index");
  return static_cast<std::size_t>(idx);
}

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.value("version", kConfigVersion);
    if (version != kConfigVersion) {
      fail(ErrorCode::ConfigError, "config version " + std::to_string(version) + " is not supported");
    }
    ModelConfig config;
    auto names = doc.at("names").get<std::vector<std::string>>();
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : doc.value("edges", json::array())) {
      if (!e.is_array() || e.size() != 2) fail(ErrorCode::ConfigError, "an edge is a [parent, child] pair");
      edges.emplace_back(edge_end(e[0], names), edge_end(e[1], names));
    }
    const std::size_t d = names.size();
    config.dag = validate_dag(edges, d, std::move(names));
    config.seed = doc.value("seed", std::uint64_t{0});
    TrainConfig defaults;
    defaults.seed = config.seed;
    if (doc.contains("train")) defaults = train_config_from_json(doc.at("train"), defaults);

    config.modeled.resize(d);
    config.train.assign(d, defaults);
    for (std::size_t v = 0; v < d; ++v) config.modeled[v] = !config.dag.parents(v).empty();
    if (doc.contains("nodes")) {
      for (const auto& [name, node] : doc.at("nodes").items()) {
        const std::size_t v = config.dag.index_of(name);
        const auto kind = node.value("kind", "modeled");
        if (kind == "data") {
          config.modeled[v] = false;
        } else if (kind == "modeled") {
          config.modeled[v] = true;
        } else {
          fail(ErrorCode::ConfigError, "node '" + name + "': kind must be 'data' or 'modeled'");
        }
        if (node.contains("train")) config.train[v] = train_config_from_json(node.at("train"), defaults);
      }
    }
    config.hash = config_hash(text);
    return config;
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("config: ") + e.what());
  }
}

ModelConfig load_model_config(const std::string& path) { return parse_model_config(read_file(path)); }

TrainedBundle train_model(const ModelConfig& config, const Dataset& data,
                          const std::function<void(std::size_t, const TrainReport&)>& on_node) {
  const Dag& dag = config.dag;
  std::vector<NodeKind> kinds(dag.n_vars(), DataSourceNode{});
  std::vector<NodeReport> reports;
  for (std::size_t v : topological_order(dag)) {
    if (!config.modeled[v]) continue;
    try {
      const std::size_t node_col = data.column_index(dag.name(v));
      std::vector<std::size_t> parent_cols;
      for (std::size_t p : dag.parents(v)) parent_cols.push_back(data.column_index(dag.name(p)));
      const TrainConfig& tc = config.train[v];
      Rng rng = Rng(tc.seed).split(v + 1);
      FitResult fit = fit_node(data, node_col, parent_cols, tc, rng);
      if (on_node) on_node(v, fit.report);
      reports.push_back({v, fit.report});
      kinds[v] = ModeledNode{std::move(fit.transport), tc};
    } catch (const Error& e) {
      fail(e.code(), "node '" + dag.name(v) + "': " + e.what());
    }
  }
  return {TrainedModel(dag, std::move(kinds), Provenance{config.hash, config.seed}), std::move(reports)};
}

NormalizationSpec parse_norm(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '{') {
    try {
      return norm_from_json(json::parse(text));
    } catch (const json::exception& e) {
      fail(ErrorCode::UsageError, std::string("normalization JSON: ") + e.what());
    }
  }
  if (text == "comonotonic") return Comonotonic{};
  if (text == "countermonotonic") return Countermonotonic{};
  if (text == "independent") return Independent{};
  if (text.starts_with("gaussian:")) {
    const double sigma = parse_number(text.substr(9), "gaussian sigma");
    if (!(sigma > 0.0)) fail(ErrorCode::UsageError, "gaussian sigma must be positive");
    return make_gaussian(sigma);
  }
  if (text.starts_with("corr:")) {
    const std::string path(text.substr(5));
    try {
      const json doc = json::parse(read_file(path));
      return norm_from_json(doc.is_array() ? json{{"kind", "corr"}, {"matrix", doc}} : doc);
    } catch (const json::exception& e) {
      fail(ErrorCode::ConfigError, "correlation file '" + path + "': " + e.what());
    }
  }
  fail(ErrorCode::UsageError, "unknown normalization '" + std::string(text) +
                                  "' (comonotonic, countermonotonic, independent, gaussian:<sigma>, corr:<path>)");
}

InterventionSpec parse_world(std::string_view text, const Dag& dag) {
  InterventionSpec world(dag.n_vars());
  text = trim(text);
  if (text.empty() || text == "identity") return world;
  for (std::string_view term : split(text, ';')) {
    term = trim(term);
    if (term.empty()) continue;
    const std::size_t eq = term.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      fail(ErrorCode::UsageError, "world term '" + std::string(term) + "' needs '='");
    }
    const char op = term[eq - 1];
    std::string_view rhs = trim(term.substr(eq + 1));
    if (op != '+' && op != '-') {
      world.set(variable_index(term.substr(0, eq), dag), SetConstant{parse_number(rhs, "set value")});
      continue;
    }
    const std::size_t var = variable_index(term.substr(0, eq - 1), dag);
    const double sign = op == '+' ? 1.0 : -1.0;
    const std::size_t bracket = rhs.find('[');
    if (bracket == std::string_view::npos) {
      world.set(var, Shift{sign * parse_number(rhs, "shift")});
      continue;
    }
    if (rhs.back() != ']') fail(ErrorCode::UsageError, "clip bounds must end with ']'");
    const auto bounds = split(rhs.substr(bracket + 1, rhs.size() - bracket - 2), ':');
    if (bounds.size() != 2) fail(ErrorCode::UsageError, "clip bounds are written [lo:hi]");
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double lo = trim(bounds[0]).empty() ? -inf : parse_number(bounds[0], "clip lo");
    const double hi = trim(bounds[1]).empty() ? inf : parse_number(bounds[1], "clip hi");
    VarAction action = ShiftClip{sign * parse_number(rhs.substr(0, bracket), "shift"), lo, hi};
    try {
      validate_action(action);
    } catch (const Error& e) {
      fail(ErrorCode::UsageError, e.what());
    }
    world.set(var, action);
  }
  return world;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  for (auto part : split(trim(text), ',')) out.push_back(parse_number(part, "list entry"));
  return out;
}

std::vector<double> parse_grid(std::string_view text) {
  text = trim(text);
  if (text.find(':') == std::string_view::npos) return parse_list(text);
  const auto parts = split(text, ':');
  if (parts.size() != 3) fail(ErrorCode::UsageError, "grid is 'start:stop:step' or a comma list");
  const double a = parse_number(parts[0], "grid start");
  const double b = parse_number(parts[1], "grid stop");
  const double step = parse_number(parts[2], "grid step");
  if (!(step > 0.0) || b < a) fail(ErrorCode::UsageError, "grid needs start <= stop and step > 0");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
  if (count > 1000000) fail(ErrorCode::UsageError, "grid has too many points");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = a + static_cast<double>(i) * step;
  return out;
}

}  // namespace ctfkit
