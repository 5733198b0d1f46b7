#include "spfa/loading_matrix.hpp"

#include "spfa/error.hpp"

namespace spfa {

std::vector<std::string> default_labels(const std::string& prefix, Index count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

LoadingMatrix::LoadingMatrix(Matrix v, std::vector<std::string> variable_names,
                             std::vector<std::string> factor_names)
    : values(std::move(v)), variables(std::move(variable_names)), factors(std::move(factor_names)) {
  if (variables.empty()) variables = default_labels("X", values.rows());
  if (factors.empty()) factors = default_labels("F", values.cols());
  if (static_cast<Index>(variables.size()) != values.rows() ||
      static_cast<Index>(factors.size()) != values.cols()) {
    throw InputError("loading matrix labels do not match its dimensions");
  }
}

std::vector<Index> LoadingMatrix::out_of_range_rows() const {
  std::vector<Index> rows_out;
  for (Index i = 0; i < values.rows(); ++i) {
    if (values.cols() > 0 && values.row(i).cwiseAbs().maxCoeff() > 1.2) rows_out.push_back(i);
  }
  return rows_out;
}

}  // namespace spfa
