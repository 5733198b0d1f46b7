#pragma once

// Gradient-projection rotation (orthogonal and oblique) of an orthogonal
// loading matrix A. Orthogonal mode: L = A T with T'T = I. Oblique mode:
// L = A (T')^-1 with unit-length columns in T and factor correlations T'T.
//
// All criteria are minimized. Varimax and the Crawford-Ferguson family are
// written with the sign convention that makes smaller values simpler, so a
// decreasing varimax value is an increasing column variance of squared
// loadings.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spfa/loading_matrix.hpp"
#include "spfa/matrix_kernel.hpp"

namespace spfa {

enum class Criterion { varimax, parsimax, infomax, target };
enum class RotationMode { orthogonal, oblique };

std::string to_string(Criterion c);
std::string to_string(RotationMode m);
Criterion parse_criterion(const std::string& name);
RotationMode parse_rotation_mode(const std::string& name);

struct CriterionValue {
  double value = 0.0;
  Matrix gradient;  // dQ/dL, same shape as L
};

// Crawford-Ferguson weight that yields parsimax for a p x q matrix.
double parsimax_kappa(Index p, Index q);

// Crawford-Ferguson family member with column weight kappa.
CriterionValue crawford_ferguson(const Matrix& l, double kappa);

// Value and gradient of `criterion` at rotated loadings `l`. `target` is
// required for Criterion::target and ignored otherwise.
CriterionValue criterion_value_and_gradient(const Matrix& l, Criterion criterion,
                                            const Matrix* target = nullptr);

struct RotationOptions {
  // Random orthonormal starts in addition to the identity start.
  int random_starts = 10;
  // Stop when the projected gradient norm falls below this.
  double gradient_tolerance = 1e-6;
  // Also stop when one accepted step improves the criterion by less than this.
  double criterion_tolerance = 1e-12;
  int max_iterations = 1000;
  std::uint64_t seed = 20190;
  // Rotate row-normalized loadings and rescale afterwards.
  bool kaiser_normalize = false;
};

struct RotationSolution {
  LoadingMatrix pattern;
  Matrix transform;  // T
  Matrix phi;        // T'T; identity in orthogonal mode
  double criterion_value = 0.0;
  Criterion criterion = Criterion::varimax;
  RotationMode mode = RotationMode::orthogonal;
  int random_start_index = 0;  // 0 is the identity start
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // criterion values of the winning start
};

RotationSolution rotate(const LoadingMatrix& lambda, Criterion criterion, RotationMode mode,
                        const RotationOptions& opts = {}, const Matrix& target = {});

// The no-op rotation: T = I, no sign changes.
RotationSolution identity_rotation(const LoadingMatrix& lambda, Criterion criterion,
                                   RotationMode mode);

}  // namespace spfa
