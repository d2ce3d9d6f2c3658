#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ctfkit/dataset.hpp"
#include "ctfkit/engine.hpp"

namespace ctfkit {

/// 10 sin(pi t / 14), the toy regression function.
double toy_regression(double t);

/// X ~ U(0, 10), Y | X ~ Laplace(toy_regression(X), 1). Columns "x", "y".
Dataset gen_toy(std::size_t n, std::uint64_t seed);

/// Synthetic stand-in for the 401(k) study: nine pretreatment covariates
/// z1..z9, a binary treatment t with covariate-dependent propensity
/// strictly inside (0, 1), and a heavy-tailed outcome y whose effect grows
/// with the outcome level.
Dataset gen_401k_surrogate(std::size_t n, std::uint64_t seed);

/// Which columns to read, in order, and their roles.
struct CsvSchema {
  std::vector<std::string> columns;  // empty: every header column
  std::map<std::string, ColumnRole> roles;
};

/// {"columns": [{"name": "z1", "role": "covariate"}, ...]}
CsvSchema load_schema(const std::string& path);
CsvSchema parse_schema(std::string_view json_text);

struct CsvLoad {
  Dataset data;
  std::size_t dropped_rows = 0;  // rows with a non-finite entry
};

/// Header row required; lines starting with '#' are skipped. Throws
/// MissingColumn, ParseError (with the line number) and IoError.
CsvLoad read_csv(std::istream& in, const CsvSchema& schema = {});
CsvLoad load_csv(const std::string& path, const CsvSchema& schema = {});

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

/// `comment` becomes a leading "# ..." line when non-empty.
void write_csv(std::ostream& out, const Dataset& data, const std::string& comment = {});
void save_csv(const std::string& path, const Dataset& data, const std::string& comment = {});

/// Header `sample,world,<var names>`; one line per (sample, world).
void write_world_tensor(std::ostream& out, const WorldTensor& tensor, const std::vector<std::string>& names,
                        const std::string& comment = {});

inline constexpr int kModelFormatVersion = 1;

std::string model_to_text(const TrainedModel& model);
/// Throws FormatVersionMismatch or CorruptFile.
TrainedModel model_from_text(std::string_view text);
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

/// 64-bit FNV-1a as 16 hex digits.
std::string config_hash(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view text);

}  // namespace ctfkit
