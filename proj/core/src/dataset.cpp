#include "ctfkit/dataset.hpp"

#include <algorithm>

#include "ctfkit/error.hpp"

namespace ctfkit {

std::size_t Dataset::column_index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(ErrorCode::MissingColumn, "no column named '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

Eigen::VectorXd Dataset::column(const std::string& name) const {
  return values.col(static_cast<Eigen::Index>(column_index(name)));
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.names = names;
  out.roles = roles;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= this->rows()) {
      fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(rows[i]) + " out of range");
    }
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace ctfkit
