#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctfkit/config.hpp"
#include "ctfkit/data_io.hpp"
#include "ctfkit/distributions.hpp"
#include "ctfkit/engine.hpp"
#include "ctfkit/error.hpp"
#include "ctfkit/explorer.hpp"
#include "ctfkit/serialize.hpp"

using namespace ctfkit;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

// Writes to a file, or to stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {}
  std::ostream& stream() { return buf_; }
  void commit() {
    if (path_ == "-") {
      std::cout << buf_.str();
    } else {
      write_file(path_, buf_.str());
    }
  }

 private:
  std::string path_;
  std::ostringstream buf_;
};

std::string metadata(const std::string& command, const TrainedModel* model, std::uint64_t seed) {
  std::string line = "ctfkit " + command;
  if (model) line += " config_hash=" + (model->provenance().config_hash.empty() ? "none" : model->provenance().config_hash);
  return line + " seed=" + std::to_string(seed);
}

NormalizationSpec norm_or_default(const std::string& text) {
  if (text.empty()) {
    std::cerr << "note: no --norm given, using comonotonic\n";
    return Comonotonic{};
  }
  return parse_norm(text);
}

std::size_t node_index(const TrainedModel& model, const std::string& name) {
  if (name.empty()) {
    const auto& order = model.order();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (model.is_modeled(*it)) return *it;
    }
    fail(ErrorCode::NodeNotModeled, "model has no modeled node");
  }
  for (std::size_t v = 0; v < model.n_vars(); ++v) {
    if (model.dag().name(v) == name) return v;
  }
  fail(ErrorCode::UsageError, "unknown node '" + name + "'");
}

void require_positive(std::size_t n, const char* flag) {
  if (n == 0) fail(ErrorCode::UsageError, std::string(flag) + " must be at least 1");
}

Dataset load_data(const std::string& path, const std::string& schema_path) {
  const CsvSchema schema = schema_path.empty() ? CsvSchema{} : load_schema(schema_path);
  CsvLoad load = load_csv(path, schema);
  if (load.dropped_rows > 0) {
    std::cerr << "note: dropped " << load.dropped_rows << " rows with missing or non-finite values\n";
  }
  return std::move(load.data);
}

RowSource row_source(const TrainedModel& model, const std::string& data_path, const std::string& schema_path,
                     long long fix_row) {
  if (data_path.empty()) {
    if (fix_row >= 0) fail(ErrorCode::UsageError, "--fix-row needs --data");
    return RowSource::none();
  }
  const Dataset data = load_data(data_path, schema_path);
  if (fix_row >= 0) return RowSource::fixed_from(data, model.dag(), static_cast<std::size_t>(fix_row));
  return RowSource::resample(data, model.dag());
}

// "name=value;..." for parents held fixed.
std::vector<double> parent_values(const TrainedModel& model, std::size_t node, const std::string& spec) {
  const auto& parents = model.dag().parents(node);
  std::vector<double> values(parents.size(), 0.0);
  const InterventionSpec set = parse_world(spec, model.dag());
  for (std::size_t j = 0; j < parents.size(); ++j) {
    if (const auto* c = std::get_if<SetConstant>(&set[parents[j]])) values[j] = c->value;
  }
  return values;
}

std::size_t parent_slot(const TrainedModel& model, std::size_t node, const std::string& name) {
  const auto& parents = model.dag().parents(node);
  if (parents.empty()) fail(ErrorCode::UsageError, "node '" + model.dag().name(node) + "' has no parents");
  if (name.empty()) return 0;
  for (std::size_t j = 0; j < parents.size(); ++j) {
    if (model.dag().name(parents[j]) == name) return j;
  }
  fail(ErrorCode::UsageError, "'" + name + "' is not a parent of '" + model.dag().name(node) + "'");
}

struct GenArgs {
  std::size_t n = 5000;
  std::uint64_t seed = 0;
  std::string out = "-";
};

struct TrainArgs {
  std::string config, data, schema, out_model, report;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
};

void cmd_train(const TrainArgs& a) {
  ModelConfig config = load_model_config(a.config);
  for (std::size_t v = 0; v < config.train.size(); ++v) {
    if (a.seed) config.train[v].seed = *a.seed;
    if (a.epochs) config.train[v].epochs = *a.epochs;
  }
  if (a.seed) config.seed = *a.seed;
  const Dataset data = load_data(a.data, a.schema);
  const auto start = std::chrono::steady_clock::now();
  TrainedBundle bundle = train_model(config, data, [&](std::size_t v, const TrainReport& r) {
    std::cerr << "trained '" << config.dag.name(v) << "' in " << r.seconds << " s, final loss "
              << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back()) << "\n";
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model(bundle.model, a.out_model);

  if (!a.report.empty()) {
    std::filesystem::create_directories(a.report);
    const AdamState adam;
    nlohmann::json summary{{"config_hash", config.hash},
                           {"seed", config.seed},
                           {"init", "raw weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0"},
                           {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}},
                           {"nodes", nlohmann::json::array()}};
    for (const auto& nr : bundle.reports) {
      const std::string& name = config.dag.name(nr.node);
      std::ostringstream csv;
      csv << "# " << metadata("train", &bundle.model, config.train[nr.node].seed) << "\nepoch,loss\n";
      for (std::size_t e = 0; e < nr.report.epoch_loss.size(); ++e) {
        csv << e + 1 << ',' << format_double(nr.report.epoch_loss[e]) << '\n';
      }
      write_file((std::filesystem::path(a.report) / ("loss_" + name + ".csv")).string(), csv.str());
      summary["nodes"].push_back({{"node", name},
                                  {"epochs", nr.report.epoch_loss.size()},
                                  {"steps", nr.report.steps},
                                  {"bandwidth", nr.report.bandwidth},
                                  {"first_loss", nr.report.epoch_loss.front()},
                                  {"final_loss", nr.report.epoch_loss.back()}});
    }
    // Timing lives apart from the deterministic files.
    write_file((std::filesystem::path(a.report) / "summary.json").string(), summary.dump(2) + "\n");
    write_file((std::filesystem::path(a.report) / "timing.json").string(),
               nlohmann::json{{"train_seconds", seconds}}.dump() + "\n");
  }
}

struct SampleArgs {
  std::string model, norm, out = "-", data, schema, node;
  std::vector<std::string> worlds;
  std::size_t n = 1500;
  std::uint64_t seed = 0;
  long long fix_row = -1;
};

void cmd_coupling(const SampleArgs& a) {
  const TrainedModel model = load_model(a.model);
  require_positive(a.n, "--n");
  if (a.worlds.empty()) fail(ErrorCode::UsageError, "give at least one --world");
  std::vector<InterventionSpec> worlds;
  for (const auto& w : a.worlds) worlds.push_back(parse_world(w, model.dag()));
  const NormalizationSpec norm = norm_or_default(a.norm);
  const RowSource rows = row_source(model, a.data, a.schema, a.fix_row);
  Rng rng(a.seed);
  const WorldTensor t = sample_counterfactual(model, WorldSet(worlds), uniform_norms(model, norm), rng, a.n, rows);
  Output out(a.out);
  write_world_tensor(out.stream(), t, model.dag().names(), metadata("coupling norm=" + describe(norm), &model, a.seed));
  out.commit();
  if (worlds.size() == 2) {
    const std::size_t node = node_index(model, a.node);
    std::cerr << "spearman(" << model.dag().name(node) << ") = " << spearman(t.slice(0, node), t.slice(1, node))
              << "\n";
  }
}

struct EffectArgs {
  std::string model, phi, grid, out = "-", node, parent, fixed;
  std::size_t n = 10000;
  std::uint64_t seed = 0;
};

void cmd_effect(const EffectArgs& a) {
  const TrainedModel model = load_model(a.model);
  require_positive(a.n, "--n");
  const std::size_t node = node_index(model, a.node);
  const std::size_t slot = parent_slot(model, node, a.parent);
  const InterventionSpec phi = parse_world(a.phi, model.dag());
  std::vector<double> parents = parent_values(model, node, a.fixed);
  const std::vector<double> grid = parse_grid(a.grid);
  Rng rng(a.seed);
  Output out(a.out);
  out.stream() << "# " << metadata("effect", &model, a.seed) << "\n"
               << model.dag().name(model.dag().parents(node)[slot]) << ",effect,std_error\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    parents[slot] = grid[i];
    Rng point_rng = rng.split(i);
    const EffectEstimate e = interventional_effect(model, node, parents, phi, a.n, point_rng);
    out.stream() << format_double(grid[i]) << ',' << format_double(e.effect) << ',' << format_double(e.std_error) << '\n';
  }
  out.commit();
}

struct QuantileEffectArgs {
  std::string model, world0, world1, norm, qs = "0.1,0.25,0.5,0.75,0.9", out = "-", node, data, schema;
  std::size_t n = 5000;
  std::size_t replications = 10;
  std::uint64_t seed = 0;
  long long fix_row = -1;
};

void cmd_quantile_effect(const QuantileEffectArgs& a) {
  const TrainedModel model = load_model(a.model);
  require_positive(a.n, "--n");
  const std::size_t node = node_index(model, a.node);
  const NormalizationSpec norm = norm_or_default(a.norm);
  const RowSource rows = row_source(model, a.data, a.schema, a.fix_row);
  std::vector<double> qs = parse_list(a.qs);
  std::sort(qs.begin(), qs.end());
  SecondaryConfig secondary;
  secondary.replications = a.replications;
  Rng rng(a.seed);
  const auto curve = quantile_effect_curve(model, node, parse_world(a.world0, model.dag()),
                                           parse_world(a.world1, model.dag()), norm, qs, a.n, rng, rows, secondary);
  Output out(a.out);
  out.stream() << "# " << metadata("quantile-effect norm=" + describe(norm), &model, a.seed) << "\nq,effect,std_error\n";
  for (const auto& p : curve) {
    out.stream() << format_double(p.q) << ',' << format_double(p.effect) << ',' << format_double(p.std_error) << '\n';
  }
  out.commit();
}

struct QuantilesArgs {
  std::string model, node, qs = "0.05,0.5,0.95", grid, out = "-", parent, fixed;
};

void cmd_quantiles(const QuantilesArgs& a) {
  const TrainedModel model = load_model(a.model);
  const std::size_t node = node_index(model, a.node);
  std::vector<double> qs = parse_list(a.qs);
  std::sort(qs.begin(), qs.end());
  const bool has_parents = !model.dag().parents(node).empty();
  const std::size_t slot = has_parents ? parent_slot(model, node, a.parent) : 0;
  std::vector<double> parents = parent_values(model, node, a.fixed);
  const std::vector<double> grid = has_parents ? parse_grid(a.grid) : std::vector<double>{0.0};
  Output out(a.out);
  out.stream() << "# " << metadata("quantiles", &model, 0) << "\n"
               << (has_parents ? model.dag().name(model.dag().parents(node)[slot]) : std::string("x")) << ",q,value\n";
  for (double q : qs) {
    for (double g : grid) {
      if (has_parents) parents[slot] = g;
      out.stream() << format_double(g) << ',' << format_double(q) << ','
                   << format_double(conditional_quantile(model, node, parents, q)) << '\n';
    }
  }
  out.commit();
}

struct PinballArgs {
  std::string model, node, data, schema, qs = "0.05,0.5,0.95", out = "-";
};

void cmd_pinball(const PinballArgs& a) {
  const TrainedModel model = load_model(a.model);
  const std::size_t node = node_index(model, a.node);
  const Dataset data = load_data(a.data, a.schema);
  const auto& pa = model.dag().parents(node);
  std::vector<std::size_t> cols;
  for (std::size_t p : pa) cols.push_back(data.column_index(model.dag().name(p)));
  const Eigen::VectorXd y = data.column(model.dag().name(node));
  std::vector<double> qs = parse_list(a.qs);
  std::sort(qs.begin(), qs.end());
  Output out(a.out);
  out.stream() << "# " << metadata("pinball", &model, 0) << "\nq,pinball\n";
  std::vector<double> parents(pa.size()), preds(data.rows()), targets(y.data(), y.data() + y.size());
  for (double q : qs) {
    for (std::size_t i = 0; i < data.rows(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        parents[j] = data.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[j]));
      }
      preds[i] = conditional_quantile(model, node, parents, q);
    }
    out.stream() << format_double(q) << ',' << format_double(pinball_loss(preds, targets, q)) << '\n';
  }
  out.commit();
}

struct ServeArgs {
  std::string model, data, schema, host = "127.0.0.1", cors = "*";
  int port = 8080;
  std::size_t max_n = 20000;
};

void cmd_serve(const ServeArgs& a) {
  auto model = std::make_shared<const TrainedModel>(load_model(a.model));
  std::optional<Dataset> data;
  if (!a.data.empty()) data = load_data(a.data, a.schema);
  ExplorerLimits limits;
  limits.max_n = a.max_n;
  const ExplorerService service(model, std::move(data), limits);
  HttpServer server(service, ServeOptions{a.host, a.port, a.cors});
  const int port = server.bind();
  std::cerr << "serving on http://" << a.host << ':' << port << "\n";
  server.listen();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctfkit: counterfactual transport models"};
  app.require_subcommand(1);

  GenArgs toy, k401;
  auto* gen_toy_cmd = app.add_subcommand("gen-toy", "Sample the sine-plus-Laplace toy dataset");
  auto* gen_401k_cmd = app.add_subcommand("gen-401k", "Sample the synthetic 401(k)-style dataset");
  for (auto [cmd, args] : {std::pair{gen_toy_cmd, &toy}, std::pair{gen_401k_cmd, &k401}}) {
    cmd->add_option("--n", args->n, "Rows")->capture_default_str();
    cmd->add_option("--seed", args->seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", args->out, "Output CSV, '-' for stdout")->capture_default_str();
  }

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Fit a transport for every modeled node");
  train_cmd->add_option("--config", train.config, "Model config JSON")->required();
  train_cmd->add_option("--data", train.data, "Training CSV")->required();
  train_cmd->add_option("--schema", train.schema, "Column schema JSON");
  train_cmd->add_option("--out-model", train.out_model, "Model file to write")->required();
  train_cmd->add_option("--report", train.report, "Directory for loss curves and a summary");
  train_cmd->add_option("--seed", train.seed, "Override the config seed");
  train_cmd->add_option("--epochs", train.epochs, "Override the epoch count of every node");

  SampleArgs coupling;
  auto* coupling_cmd = app.add_subcommand("coupling", "Sample a joint over parallel worlds");
  coupling_cmd->add_option("--model", coupling.model, "Model file")->required();
  coupling_cmd->add_option("--world", coupling.worlds, "World spec, repeat per world (e.g. 'x=4')")->required();
  coupling_cmd->add_option("--norm", coupling.norm, "comonotonic | countermonotonic | independent | gaussian:<s> | corr:<path>");
  coupling_cmd->add_option("--n", coupling.n, "Samples")->capture_default_str();
  coupling_cmd->add_option("--seed", coupling.seed, "Random seed")->capture_default_str();
  coupling_cmd->add_option("--out", coupling.out, "Output CSV")->capture_default_str();
  coupling_cmd->add_option("--node", coupling.node, "Node for the rank correlation summary");
  coupling_cmd->add_option("--data", coupling.data, "Dataset for data-source variables");
  coupling_cmd->add_option("--schema", coupling.schema, "Column schema JSON");
  coupling_cmd->add_option("--fix-row", coupling.fix_row, "Use this dataset row for every sample");

  EffectArgs effect;
  auto* effect_cmd = app.add_subcommand("effect", "E[Y^phi - Y | parents] along a parent grid");
  effect_cmd->add_option("--model", effect.model, "Model file")->required();
  effect_cmd->add_option("--phi", effect.phi, "Intervention, e.g. 'x+=1[:10]'")->required();
  effect_cmd->add_option("--grid", effect.grid, "start:stop:step or a list")->required();
  effect_cmd->add_option("--n", effect.n, "Noise draws per grid point")->capture_default_str();
  effect_cmd->add_option("--seed", effect.seed, "Random seed")->capture_default_str();
  effect_cmd->add_option("--out", effect.out, "Output CSV")->capture_default_str();
  effect_cmd->add_option("--node", effect.node, "Outcome node (default: last modeled)");
  effect_cmd->add_option("--parent", effect.parent, "Parent swept by the grid (default: first)");
  effect_cmd->add_option("--parents", effect.fixed, "Other parent values, e.g. 'z=1;w=0'");

  QuantileEffectArgs qeffect;
  auto* qeffect_cmd = app.add_subcommand("quantile-effect", "E[Y1 - Y0 | Y0 = q-quantile] between two worlds");
  qeffect_cmd->add_option("--model", qeffect.model, "Model file")->required();
  qeffect_cmd->add_option("--world0", qeffect.world0, "First world")->required();
  qeffect_cmd->add_option("--world1", qeffect.world1, "Second world")->required();
  qeffect_cmd->add_option("--norm", qeffect.norm, "Normalization");
  qeffect_cmd->add_option("--qs", qeffect.qs, "Quantile levels")->capture_default_str();
  qeffect_cmd->add_option("--n", qeffect.n, "Samples per replication")->capture_default_str();
  qeffect_cmd->add_option("--replications", qeffect.replications, "Regressor refits")->capture_default_str();
  qeffect_cmd->add_option("--seed", qeffect.seed, "Random seed")->capture_default_str();
  qeffect_cmd->add_option("--out", qeffect.out, "Output CSV")->capture_default_str();
  qeffect_cmd->add_option("--node", qeffect.node, "Outcome node (default: last modeled)");
  qeffect_cmd->add_option("--data", qeffect.data, "Dataset for data-source variables");
  qeffect_cmd->add_option("--schema", qeffect.schema, "Column schema JSON");
  qeffect_cmd->add_option("--fix-row", qeffect.fix_row, "Use this dataset row for every sample");

  QuantilesArgs quantiles;
  auto* quantiles_cmd = app.add_subcommand("quantiles", "Conditional quantile curves over a parent grid");
  quantiles_cmd->add_option("--model", quantiles.model, "Model file")->required();
  quantiles_cmd->add_option("--node", quantiles.node, "Node (default: last modeled)");
  quantiles_cmd->add_option("--qs", quantiles.qs, "Quantile levels")->capture_default_str();
  quantiles_cmd->add_option("--grid", quantiles.grid, "Parent grid");
  quantiles_cmd->add_option("--parent", quantiles.parent, "Parent swept by the grid (default: first)");
  quantiles_cmd->add_option("--parents", quantiles.fixed, "Other parent values");
  quantiles_cmd->add_option("--out", quantiles.out, "Output CSV")->capture_default_str();

  PinballArgs pinball;
  auto* pinball_cmd = app.add_subcommand("pinball", "Mean pinball loss of conditional quantiles on a dataset");
  pinball_cmd->add_option("--model", pinball.model, "Model file")->required();
  pinball_cmd->add_option("--data", pinball.data, "Evaluation CSV")->required();
  pinball_cmd->add_option("--schema", pinball.schema, "Column schema JSON");
  pinball_cmd->add_option("--node", pinball.node, "Node (default: last modeled)");
  pinball_cmd->add_option("--qs", pinball.qs, "Quantile levels")->capture_default_str();
  pinball_cmd->add_option("--out", pinball.out, "Output CSV")->capture_default_str();

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Start the explorer HTTP service");
  serve_cmd->add_option("--model", serve.model, "Model file")->required();
  serve_cmd->add_option("--port", serve.port, "Port")->capture_default_str();
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--data", serve.data, "Dataset enabling row resampling");
  serve_cmd->add_option("--schema", serve.schema, "Column schema JSON");
  serve_cmd->add_option("--max-n", serve.max_n, "Per-request sample cap")->capture_default_str();
  serve_cmd->add_option("--cors-origin", serve.cors, "Access-Control-Allow-Origin value")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << error_code_name(ErrorCode::UsageError) << ": " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen_toy_cmd || *gen_401k_cmd) {
      const bool is_toy = static_cast<bool>(*gen_toy_cmd);
      const GenArgs& g = is_toy ? toy : k401;
      require_positive(g.n, "--n");
      const Dataset d = is_toy ? gen_toy(g.n, g.seed) : gen_401k_surrogate(g.n, g.seed);
      Output out(g.out);
      write_csv(out.stream(), d, metadata(is_toy ? "gen-toy" : "gen-401k", nullptr, g.seed));
      out.commit();
    } else if (*train_cmd) {
      cmd_train(train);
    } else if (*coupling_cmd) {
      cmd_coupling(coupling);
    } else if (*effect_cmd) {
      cmd_effect(effect);
    } else if (*qeffect_cmd) {
      cmd_quantile_effect(qeffect);
    } else if (*quantiles_cmd) {
      cmd_quantiles(quantiles);
    } else if (*pinball_cmd) {
      cmd_pinball(pinball);
    } else if (*serve_cmd) {
      cmd_serve(serve);
    }
  } catch (const Error& e) {
    std::cerr << e.code_name() << ": " << e.what() << "\n";
    return e.code() == ErrorCode::UsageError ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "Internal: " << e.what() << "\n";
    return kExitError;
  }
  return 0;
}
