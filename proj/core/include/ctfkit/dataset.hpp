#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ctfkit {

enum class ColumnRole { Covariate, Treatment, Outcome };

/// Rectangular table of finite reals with named columns.
struct Dataset {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows x columns
  std::map<std::string, ColumnRole> roles;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }

  /// Throws MissingColumn when absent.
  std::size_t column_index(const std::string& name) const;
  Eigen::VectorXd column(const std::string& name) const;

  Dataset select_rows(const std::vector<std::size_t>& rows) const;
};

}  // namespace ctfkit
