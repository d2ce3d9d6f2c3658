#include "ctfkit/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctfkit/distributions.hpp"
#include "ctfkit/error.hpp"
#include "ctfkit/serialize.hpp"

namespace ctfkit {

namespace {

using nlohmann::json;

double normal_draw(Rng& rng) { return standard_normal_quantile(rng.uniform_open()); }

bool bernoulli(Rng& rng, double p) { return rng.uniform_open() < p; }

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

ColumnRole parse_role(const std::string& text) {
  if (text == "covariate") return ColumnRole::Covariate;
  if (text == "treatment") return ColumnRole::Treatment;
  if (text == "outcome") return ColumnRole::Outcome;
  fail(ErrorCode::ConfigError, "unknown column role '" + text + "'");
}

// Splits one CSV record. Quoted fields may contain commas and doubled quotes
// but not newlines.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!field.empty() && !was_quoted) {
        fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": stray quote");
      }
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(field));
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view text, std::size_t line_no, const std::string& column) {
  text = trim(text);
  if (text.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::infinity();
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": column '" + column +
                                    "' is not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

double toy_regression(double t) { return 10.0 * std::sin(std::numbers::pi * t / 14.0); }

Dataset gen_toy(std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "gen_toy needs n >= 1");
  Rng rng(seed);
  Rng x_rng = rng.split(1);
  Rng y_rng = rng.split(2);
  Dataset data;
  data.names = {"x", "y"};
  data.roles = {{"x", ColumnRole::Covariate}, {"y", ColumnRole::Outcome}};
  data.values.resize(static_cast<Eigen::Index>(n), 2);
  const Dist1D x_dist = Uniform{0.0, 10.0};
  for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
    const double x = sample_one(x_dist, x_rng);
    data.values(i, 0) = x;
    data.values(i, 1) = sample_one(Laplace{toy_regression(x), 1.0}, y_rng);
  }
  return data;
}

Dataset gen_401k_surrogate(std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "gen_401k_surrogate needs n >= 1");
  Rng rng(seed);
  Dataset data;
  data.names = {"age", "inc", "educ", "fsize", "marr", "twoearn", "db", "pira", "hown", "e401", "net_tfa"};
  for (std::size_t c = 0; c < 9; ++c) data.roles[data.names[c]] = ColumnRole::Covariate;
  data.roles["e401"] = ColumnRole::Treatment;
  data.roles["net_tfa"] = ColumnRole::Outcome;
  data.values.resize(static_cast<Eigen::Index>(n), 11);

  for (Eigen::Index i = 0; i < data.values.rows(); ++i) {
    // Units: years, thousands of dollars.
    const double age = 25.0 + 39.0 * rng.uniform_open();
    const double inc = std::exp(3.4 + 0.55 * normal_draw(rng));
    const double educ = std::clamp(std::round(13.0 + 2.5 * normal_draw(rng)), 6.0, 18.0);
    const double fsize = 1.0 + static_cast<double>(rng.uniform_index(5));
    const double marr = bernoulli(rng, 0.6) ? 1.0 : 0.0;
    const double twoearn = marr > 0.0 && bernoulli(rng, 0.5) ? 1.0 : 0.0;
    const double db = bernoulli(rng, 0.3) ? 1.0 : 0.0;
    const double pira = bernoulli(rng, logistic(-2.0 + 0.03 * inc)) ? 1.0 : 0.0;
    const double hown = bernoulli(rng, logistic(-1.5 + 0.04 * (age - 25.0) + 0.01 * inc)) ? 1.0 : 0.0;

    const double propensity =
        std::clamp(logistic(-1.2 + 0.03 * (inc - 30.0) + 0.08 * (educ - 13.0) + 0.4 * db), 0.05, 0.95);
    const double t = bernoulli(rng, propensity) ? 1.0 : 0.0;

    // Student t with 3 degrees of freedom.
    const double z = normal_draw(rng);
    double chi = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double g = normal_draw(rng);
      chi += g * g;
    }
    const double eps = z / std::sqrt(chi / 3.0);

    const double mu = -5.0 + 0.3 * inc + 0.2 * (age - 40.0) + 8.0 * pira + 4.0 * hown + 1.0 * twoearn -
                      0.5 * (fsize - 3.0) + 0.3 * (educ - 13.0) - 2.0 * db + 1.0 * marr;
    const double tau = 5.0 + 0.1 * inc;
    const double scale = 3.0 + 0.15 * inc;
    const double y = mu + t * tau + (1.0 + 0.5 * t) * scale * eps;

    const double row[] = {age, inc, educ, fsize, marr, twoearn, db, pira, hown, t, y};
    for (Eigen::Index c = 0; c < 11; ++c) data.values(i, c) = row[c];
  }
  return data;
}

CsvSchema parse_schema(std::string_view json_text) {
  CsvSchema schema;
  try {
    const json doc = json::parse(json_text);
    for (const auto& col : doc.at("columns")) {
      const std::string name = col.at("name").get<std::string>();
      schema.columns.push_back(name);
      if (col.contains("role")) schema.roles[name] = parse_role(col.at("role").get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("schema: ") + e.what());
  }
  return schema;
}

CsvSchema load_schema(const std::string& path) { return parse_schema(read_file(path)); }

CsvLoad read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    for (auto& h : split_record(line, line_no)) header.emplace_back(trim(h));
    break;
  }
  if (header.empty()) fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": missing header row");

  const std::vector<std::string> wanted = schema.columns.empty() ? header : schema.columns;
  std::vector<std::size_t> source;
  for (const auto& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::MissingColumn, "column '" + name + "' not in CSV header");
    source.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  CsvLoad result;
  std::vector<double> flat;
  std::vector<double> row(wanted.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line.front() == '#') continue;
    const auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    }
    bool finite = true;
    for (std::size_t c = 0; c < wanted.size(); ++c) {
      row[c] = parse_cell(fields[source[c]], line_no, wanted[c]);
      finite = finite && std::isfinite(row[c]);
    }
    if (!finite) {
      ++result.dropped_rows;
      continue;
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }

  const auto cols = static_cast<Eigen::Index>(wanted.size());
  const auto rows = static_cast<Eigen::Index>(flat.size() / wanted.size());
  result.data.names = wanted;
  result.data.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, cols);
  for (const auto& [name, role] : schema.roles) {
    if (std::find(wanted.begin(), wanted.end(), name) != wanted.end()) result.data.roles[name] = role;
  }
  return result;
}

CsvLoad load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  return read_csv(in, schema);
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {

std::string quote_name(const std::string& name) {
  if (name.find_first_of(",\"") == std::string::npos) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

void write_csv(std::ostream& out, const Dataset& data, const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  for (std::size_t c = 0; c < data.names.size(); ++c) out << (c ? "," : "") << quote_name(data.names[c]);
  out << '\n';
  for (Eigen::Index r = 0; r < data.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.values.cols(); ++c) {
      out << (c ? "," : "") << format_double(data.values(r, c));
    }
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data, const std::string& comment) {
  std::ostringstream out;
  write_csv(out, data, comment);
  write_file(path, out.str());
}

void write_world_tensor(std::ostream& out, const WorldTensor& tensor, const std::vector<std::string>& names,
                        const std::string& comment) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "sample,world";
  for (const auto& name : names) out << ',' << quote_name(name);
  out << '\n';
  for (std::size_t s = 0; s < tensor.samples(); ++s) {
    for (std::size_t w = 0; w < tensor.world_count(); ++w) {
      out << s << ',' << w;
      for (std::size_t v = 0; v < tensor.n_vars(); ++v) out << ',' << format_double(tensor.at(s, w, v));
      out << '\n';
    }
  }
}

std::string model_to_text(const TrainedModel& model) { return model_to_json(model).dump(1); }

TrainedModel model_from_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

void save_model(const TrainedModel& model, const std::string& path) { write_file(path, model_to_text(model) + "\n"); }

TrainedModel load_model(const std::string& path) { return model_from_text(read_file(path)); }

std::string config_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

}  // namespace ctfkit
