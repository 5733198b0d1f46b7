#pragma once

// Orthogonal loading estimation from a moment matrix.
//
// Minres minimizes the sum of squared off-diagonal residuals of S - LL'.
// SPFA minimizes the same residual for the matrix reproduced by the factor
// score predictors, S - L (L' S^-1 L)^-1 L', and reports the loadings in the
// gauge L' S^-1 L = I.

#include <optional>
#include <string>
#include <vector>

#include "spfa/loading_matrix.hpp"
#include "spfa/matrix_kernel.hpp"

namespace spfa {

enum class ExtractionMethod { minres, spfa };

std::string to_string(ExtractionMethod m);

struct FitOptions {
  double objective_tolerance = 1e-9;
  double gradient_tolerance = 1e-6;
  int max_iterations = 2000;
};

enum class SpfaStart { minres, principal_axes, given };

struct SpfaOptions : FitOptions {
  SpfaStart start = SpfaStart::minres;
  // Used when start == given; p x q.
  Matrix start_loadings;
};

struct FactorSolution {
  ExtractionMethod method = ExtractionMethod::minres;
  // Minres: L_M. SPFA: L_s, which satisfies L_s' S^-1 L_s = I.
  LoadingMatrix loadings;
  // diag(S - LL').
  Vector uniqueness;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
  // Variables whose communality hit the Heywood ceiling and were clamped.
  std::vector<Index> heywood_variables;
  // Condition number of the analysed moment matrix.
  double condition_number = 1.0;
};

// Off-diagonal residual sum of squares of S - LL' and its gradient dF/dL.
double minres_objective(const SymMatrix& s, const Matrix& lambda);
Matrix minres_gradient(const SymMatrix& s, const Matrix& lambda);

// Off-diagonal residual sum of squares of S - L(L'S^-1 L)^-1 L' and its
// gradient. Throws RankDeficiencyError when L'S^-1L is singular.
double spfa_objective(const SymMatrix& s, const Matrix& lambda);
Matrix spfa_gradient(const SymMatrix& s, const Matrix& lambda);

// L (L' S^-1 L)^-1 L'.
SymMatrix spfa_reproduced(const SymMatrix& s, const Matrix& lambda);

// Brings L_os into the L_s gauge: L_os (L_os' S^-1 L_os)^(-1/2).
Matrix spfa_gauge(const SymMatrix& s, const Matrix& lambda_os);

FactorSolution minres_fit(const SymMatrix& s, Index q, const FitOptions& opts = {});
FactorSolution spfa_fit(const SymMatrix& s, Index q, const SpfaOptions& opts = {});

// LL' for either method (rotation invariant), or pattern * phi * pattern'.
SymMatrix reproduce_moment(const FactorSolution& solution);
SymMatrix reproduce_moment(const Matrix& pattern, const Matrix& phi);

}  // namespace spfa
