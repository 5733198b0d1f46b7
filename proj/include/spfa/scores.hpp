#pragma once

// Factor score predictors for fitted CFM (Minres) and SPFA models, and the
// validity diagnostics used to compare them. Scores are B'x with B of shape
// p x q.

#include <string>
#include <vector>

#include "spfa/extraction.hpp"
#include "spfa/rotation.hpp"

namespace spfa {

enum class PredictorFamily { best_linear, takeuchi, krijnen, bartlett, harman };

std::string to_string(PredictorFamily f);
// Accepts "anderson_rubin" as a synonym for takeuchi.
PredictorFamily parse_predictor_family(const std::string& name);

struct ScorePredictor {
  PredictorFamily family = PredictorFamily::best_linear;
  ExtractionMethod model = ExtractionMethod::minres;
  Matrix weights;  // B
  Vector scale;    // sqrt(diag(B'SB))
};

struct ValidityReport {
  Vector determinacy;                  // Cor(fhat_j, f_j)
  Matrix cross_correlations;           // Cor(fhat_i, f_j)
  Matrix predictor_intercorrelations;  // Cor(fhat_i, fhat_j)
  Matrix predictor_covariance;         // B'SB
  Matrix phi;
  // Frobenius norm of the off-diagonal part of S B (B'SB)^-1 B' S minus the
  // model-reproduced moment matrix.
  double structural_residual = 0.0;
};

// Weights of the requested predictor with (pattern, phi) taken from
// `rotation` and S as the model covariance. For SPFA the pattern is
// L_s (T')^-1 and Bartlett uses Psi_os^2 = diag(S - L_s L_s'), floored at
// 1e-8.
ScorePredictor predictor_weights(const FactorSolution& solution, const RotationSolution& rotation,
                                 PredictorFamily family, const SymMatrix& s);

ValidityReport validity_report(const ScorePredictor& predictor, const FactorSolution& solution,
                               const RotationSolution& rotation, const SymMatrix& s);

// S B (B'SB)^-1 B' S.
SymMatrix reproduced_from_predictor(const ScorePredictor& predictor, const SymMatrix& s);

// Row transform matching the moment matrix the model was fitted on.
struct Centering {
  Vector mean;
  Vector scale;  // column SDs in correlation mode, ones in covariance mode

  static Centering from_data(const Matrix& data, MomentMode mode);
};

Matrix score_rows(const ScorePredictor& predictor, const Matrix& data, const Centering& centering);

}  // namespace spfa
