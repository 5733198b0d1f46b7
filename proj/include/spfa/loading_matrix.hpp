#pragma once

#include <string>
#include <vector>

#include "spfa/matrix_kernel.hpp"

namespace spfa {

// p x q loadings with variable (row) and factor (column) labels.
struct LoadingMatrix {
  Matrix values;
  std::vector<std::string> variables;
  std::vector<std::string> factors;

  LoadingMatrix() = default;
  // Labels default to X1..Xp and F1..Fq.
  explicit LoadingMatrix(Matrix v, std::vector<std::string> variable_names = {},
                         std::vector<std::string> factor_names = {});

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  double operator()(Index i, Index j) const { return values(i, j); }

  // Row indices whose largest absolute loading exceeds 1.2, the plausibility
  // bound for correlation-metric solutions.
  std::vector<Index> out_of_range_rows() const;
};

std::vector<std::string> default_labels(const std::string& prefix, Index count);

}  // namespace spfa
