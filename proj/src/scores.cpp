#include "spfa/scores.hpp"

#include <algorithm>
#include <cmath>

#include "spfa/error.hpp"

namespace spfa {

namespace {

constexpr double kSpfaUniquenessFloor = 1e-8;  // Psi_os >= 1e-4

Matrix bartlett_uniqueness_inverse(const FactorSolution& solution, const SymMatrix& s) {
  const Matrix& sm = s.matrix();
  const Index p = sm.rows();
  Vector psi2(p);
  if (solution.method == ExtractionMethod::spfa) {
    const Matrix& l = solution.loadings.values;
    psi2 = (sm.diagonal() - l.rowwise().squaredNorm()).cwiseMax(kSpfaUniquenessFloor);
  } else {
    psi2 = solution.uniqueness;
    const double eps = 1e-10 * sm.diagonal().maxCoeff();
    for (Index i = 0; i < p; ++i) {
      if (!(psi2(i) > eps)) {
        const std::string name = static_cast<std::size_t>(i) < solution.loadings.variables.size()
                                     ? solution.loadings.variables[i]
                                     : std::to_string(i + 1);
        throw SingularityError("Bartlett weights need positive uniqueness; variable '" + name +
                               "' has uniqueness " + std::to_string(psi2(i)));
      }
    }
  }
  return psi2.cwiseInverse().asDiagonal();
}

Matrix clamp_unit(Matrix m) { return m.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace

std::string to_string(PredictorFamily f) {
  switch (f) {
    case PredictorFamily::best_linear: return "best_linear";
    case PredictorFamily::takeuchi: return "takeuchi";
    case PredictorFamily::krijnen: return "krijnen";
    case PredictorFamily::bartlett: return "bartlett";
    case PredictorFamily::harman: return "harman";
  }
  return "unknown";
}

PredictorFamily parse_predictor_family(const std::string& name) {
  if (name == "best_linear" || name == "regression") return PredictorFamily::best_linear;
  if (name == "takeuchi" || name == "anderson_rubin") return PredictorFamily::takeuchi;
  if (name == "krijnen") return PredictorFamily::krijnen;
  if (name == "bartlett") return PredictorFamily::bartlett;
  if (name == "harman") return PredictorFamily::harman;
  throw InputError("unknown predictor family '" + name +
                   "' (expected best_linear, takeuchi, anderson_rubin, krijnen, bartlett or harman)");
}

ScorePredictor predictor_weights(const FactorSolution& solution, const RotationSolution& rotation,
                                 PredictorFamily family, const SymMatrix& s) {
  const Matrix& lambda = rotation.pattern.values;
  const Matrix& phi = rotation.phi;
  const Index p = s.order();
  if (lambda.rows() != p || solution.loadings.rows() != p || lambda.cols() != solution.loadings.cols() ||
      phi.rows() != lambda.cols()) {
    throw InputError("solution, rotation and moment matrix dimensions disagree");
  }
  if (family == PredictorFamily::takeuchi && rotation.mode != RotationMode::orthogonal) {
    throw ModeError(
        "takeuchi/anderson_rubin predictor requires an orthogonal rotation: an orthogonal factor score "
        "predictor only makes sense for orthogonal factors");
  }

  const Matrix s_inv = sym_inverse(s).matrix();
  ScorePredictor out;
  out.family = family;
  out.model = solution.method;
  switch (family) {
    case PredictorFamily::best_linear:
      out.weights = s_inv * lambda * phi;
      break;
    case PredictorFamily::takeuchi: {
      const Matrix sl = s_inv * lambda;
      out.weights = sl * inverse_sqrt(lambda.transpose() * sl);
      break;
    }
    case PredictorFamily::krijnen: {
      const Matrix sl = s_inv * lambda;
      out.weights = sl * spd_inverse(lambda.transpose() * sl);
      break;
    }
    case PredictorFamily::bartlett: {
      const Matrix pl = bartlett_uniqueness_inverse(solution, s) * lambda;
      out.weights = pl * spd_inverse(lambda.transpose() * pl);
      break;
    }
    case PredictorFamily::harman:
      out.weights = lambda * spd_inverse(lambda.transpose() * lambda);
      break;
  }
  const Vector var = (out.weights.transpose() * s.matrix() * out.weights).diagonal();
  if (!out.weights.allFinite() || !(var.minCoeff() > 0)) {
    throw RankDeficiencyError("score predictor has a zero-variance component");
  }
  out.scale = var.cwiseSqrt();
  return out;
}

ValidityReport validity_report(const ScorePredictor& predictor, const FactorSolution& solution,
                               const RotationSolution& rotation, const SymMatrix& s) {
  (void)solution;
  const Matrix& b = predictor.weights;
  const Matrix& lambda = rotation.pattern.values;
  const Matrix& phi = rotation.phi;
  if (b.rows() != s.order() || b.cols() != lambda.cols() || lambda.rows() != s.order()) {
    throw InputError("predictor, rotation and moment matrix dimensions disagree");
  }

  ValidityReport r;
  r.phi = phi;
  r.predictor_covariance = b.transpose() * s.matrix() * b;
  r.predictor_covariance = 0.5 * (r.predictor_covariance + r.predictor_covariance.transpose());
  const Vector inv_sd = r.predictor_covariance.diagonal().cwiseSqrt().cwiseInverse();
  const Vector factor_inv_sd = phi.diagonal().cwiseSqrt().cwiseInverse();

  // Cov(B'x, f) = B' Lambda Phi under x = Lambda f + e.
  const Matrix cov_pf = b.transpose() * lambda * phi;
  // Model-implied correlations can leave [-1, 1] when S is far from the model.
  r.cross_correlations = clamp_unit(inv_sd.asDiagonal() * cov_pf * factor_inv_sd.asDiagonal());
  r.determinacy = r.cross_correlations.diagonal();
  r.predictor_intercorrelations = clamp_unit(inv_sd.asDiagonal() * r.predictor_covariance * inv_sd.asDiagonal());
  r.predictor_intercorrelations.diagonal().setOnes();

  Matrix diff = reproduced_from_predictor(predictor, s).matrix() - lambda * phi * lambda.transpose();
  diff.diagonal().setZero();
  r.structural_residual = diff.norm();
  return r;
}

SymMatrix reproduced_from_predictor(const ScorePredictor& predictor, const SymMatrix& s) {
  const Matrix& b = predictor.weights;
  if (b.rows() != s.order()) throw InputError("predictor weights do not match the moment matrix");
  const Matrix sb = s.matrix() * b;
  const Matrix bsb = b.transpose() * sb;
  Matrix bsb_inv;
  try {
    bsb_inv = spd_inverse(0.5 * (bsb + bsb.transpose()));
  } catch (const SingularityError& e) {
    throw RankDeficiencyError(std::string("predictor weights are rank deficient: ") + e.what());
  }
  return SymMatrix(sb * bsb_inv * sb.transpose());
}

Centering Centering::from_data(const Matrix& data, MomentMode mode) {
  if (data.rows() < 2) throw InputError("centering needs at least 2 rows");
  Centering c;
  c.mean = data.colwise().mean().transpose();
  c.scale = Vector::Ones(data.cols());
  if (mode == MomentMode::correlation) {
    const Matrix centered = data.rowwise() - c.mean.transpose();
    c.scale = (centered.colwise().squaredNorm() / static_cast<double>(data.rows() - 1)).cwiseSqrt().transpose();
    for (Index j = 0; j < c.scale.size(); ++j) {
      if (!(c.scale(j) > 0)) {
        throw DegenerateInputError("constant column " + std::to_string(j + 1) + " cannot be standardized");
      }
    }
  }
  return c;
}

Matrix score_rows(const ScorePredictor& predictor, const Matrix& data, const Centering& centering) {
  const Index p = predictor.weights.rows();
  if (data.cols() != p || centering.mean.size() != p || centering.scale.size() != p) {
    throw InputError("data have " + std::to_string(data.cols()) + " columns, predictor expects " +
                     std::to_string(p));
  }
  const Matrix z = (data.rowwise() - centering.mean.transpose()) * centering.scale.cwiseInverse().asDiagonal();
  return z * predictor.weights;
}

}  // namespace spfa
