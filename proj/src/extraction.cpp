#include "spfa/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lbfgs.hpp"
#include "spfa/error.hpp"

namespace spfa {

namespace {

constexpr double kHeywoodCeiling = 0.998;

Matrix off_diagonal(Matrix r) {
  r.diagonal().setZero();
  return r;
}

Eigen::Map<const Vector> as_vector(const Matrix& m) { return {m.data(), m.size()}; }
Eigen::Map<const Matrix> as_matrix(const Vector& v, Index p, Index q) { return {v.data(), p, q}; }

// Rotates L to principal axes of L'L (descending column sums of squares) and
// makes each column's largest absolute entry positive. Orthogonal, so it
// preserves both LL' and the SPFA gauge.
Matrix canonical_orientation(const Matrix& lambda) {
  const Index q = lambda.cols();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(lambda.transpose() * lambda);
  Matrix rot(q, q);
  for (Index k = 0; k < q; ++k) rot.col(k) = eig.eigenvectors().col(q - 1 - k);
  Matrix out = lambda * rot;
  for (Index j = 0; j < q; ++j) {
    Index imax = 0;
    out.col(j).cwiseAbs().maxCoeff(&imax);
    if (out(imax, j) < 0) out.col(j) *= -1.0;
  }
  return out;
}

void check_dimensions(const SymMatrix& s, Index q) {
  const Index p = s.order();
  if (q < 1) throw InputError("number of factors must be at least 1");
  if (q >= p) {
    throw InputError("number of factors (" + std::to_string(q) + ") must be less than the number of variables (" +
                     std::to_string(p) + ")");
  }
  if (!s.matrix().allFinite()) throw InputError("moment matrix has non-finite entries");
}

double condition_number(const SymMatrix& s) {
  const EigenPair e = sym_eigen(s);
  const double lo = e.values(e.values.size() - 1);
  return lo > 0 ? e.values(0) / lo : std::numeric_limits<double>::infinity();
}

// Shares S^-1 across the many objective evaluations of one SPFA fit.
class SpfaEvaluator {
 public:
  explicit SpfaEvaluator(const SymMatrix& s) : s_(s.matrix()), w_(sym_inverse(s).matrix()), chol_(s_) {}

  const Matrix& weight() const { return w_; }

  // Returns +inf when the gauge matrix is numerically singular.
  double value(const Matrix& lambda, Matrix* grad) const {
    const Matrix wl = w_ * lambda;
    const Matrix m = lambda.transpose() * wl;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
    const Vector& ev = eig.eigenvalues();
    if (ev.size() == 0 || !(ev(0) > 1e-12 * std::max(1e-300, ev(ev.size() - 1)))) {
      return std::numeric_limits<double>::infinity();
    }
    // L M^-1 L' = C P C' with S = CC' and P the projector onto span(C^-1 L).
    // Forming it from an orthonormal basis keeps the value invariant to the
    // parameterization of span(L) to near machine precision.
    const Matrix u = chol_.matrixL().solve(lambda);
    const Matrix basis = Eigen::HouseholderQR<Matrix>(u).householderQ() * Matrix::Identity(u.rows(), u.cols());
    const Matrix cb = chol_.matrixL() * basis;
    const Matrix r = off_diagonal(s_ - cb * cb.transpose());
    if (grad != nullptr) {
      const Matrix m_inv = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
      const Matrix a = lambda * m_inv;
      // dF/dL = -4 (I - S^-1 L M^-1 L') R L M^-1
      const Matrix ra = r * a;
      *grad = -4.0 * (ra - wl * (a.transpose() * ra));
    }
    return r.squaredNorm();
  }

  Matrix gauge(const Matrix& lambda) const {
    const Matrix m = lambda.transpose() * w_ * lambda;
    return lambda * inverse_sqrt(0.5 * (m + m.transpose()));
  }

 private:
  const Matrix& s_;
  Matrix w_;
  Eigen::LLT<Matrix> chol_;
};

double spfa_value_or_throw(const SpfaEvaluator& ev, const Matrix& lambda, Matrix* grad) {
  const double f = ev.value(lambda, grad);
  if (!std::isfinite(f)) throw RankDeficiencyError("gauge matrix L' S^-1 L is singular");
  return f;
}

Matrix principal_axes_start(const SymMatrix& s, Index q) {
  const EigenPair e = sym_eigen(s);
  return e.vectors.leftCols(q) * e.values.head(q).cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

detail::LbfgsOptions lbfgs_options(const FitOptions& o) {
  detail::LbfgsOptions l;
  l.objective_tolerance = o.objective_tolerance;
  l.gradient_tolerance = o.gradient_tolerance;
  l.max_iterations = o.max_iterations;
  return l;
}

}  // namespace

std::string to_string(ExtractionMethod m) { return m == ExtractionMethod::minres ? "cfm" : "spfa"; }

double minres_objective(const SymMatrix& s, const Matrix& lambda) {
  return off_diagonal(s.matrix() - lambda * lambda.transpose()).squaredNorm();
}

Matrix minres_gradient(const SymMatrix& s, const Matrix& lambda) {
  return -4.0 * off_diagonal(s.matrix() - lambda * lambda.transpose()) * lambda;
}

double spfa_objective(const SymMatrix& s, const Matrix& lambda) {
  return spfa_value_or_throw(SpfaEvaluator(s), lambda, nullptr);
}

Matrix spfa_gradient(const SymMatrix& s, const Matrix& lambda) {
  Matrix g;
  spfa_value_or_throw(SpfaEvaluator(s), lambda, &g);
  return g;
}

SymMatrix spfa_reproduced(const SymMatrix& s, const Matrix& lambda) {
  const Matrix w = sym_inverse(s).matrix();
  const Matrix m = lambda.transpose() * w * lambda;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  if (eig.eigenvalues().size() > 0 &&
      !(eig.eigenvalues()(0) > 1e-12 * std::max(1e-300, eig.eigenvalues().maxCoeff()))) {
    throw RankDeficiencyError("gauge matrix L' S^-1 L is singular");
  }
  return SymMatrix(lambda * spd_inverse(m) * lambda.transpose());
}

Matrix spfa_gauge(const SymMatrix& s, const Matrix& lambda_os) {
  try {
    return SpfaEvaluator(s).gauge(lambda_os);
  } catch (const SingularityError& e) {
    throw RankDeficiencyError(std::string("gauge matrix L' S^-1 L is singular: ") + e.what());
  }
}

FactorSolution minres_fit(const SymMatrix& s, Index q, const FitOptions& opts) {
  check_dimensions(s, q);
  const Index p = s.order();
  const Matrix& sm = s.matrix();
  const Matrix s_inv = sym_inverse(s).matrix();

  FactorSolution sol;
  sol.method = ExtractionMethod::minres;
  sol.condition_number = condition_number(s);

  const Vector ceiling = kHeywoodCeiling * sm.diagonal();
  std::vector<bool> clamped(static_cast<std::size_t>(p), false);
  auto clamp = [&](Vector h) {
    for (Index i = 0; i < p; ++i) {
      if (h(i) >= ceiling(i)) {
        h(i) = ceiling(i);
        clamped[i] = true;
      } else {
        clamped[i] = false;
      }
      h(i) = std::max(h(i), 0.0);
    }
    return h;
  };

  // Iterated principal axes from squared multiple correlations.
  Vector h = clamp(sm.diagonal() - s_inv.diagonal().cwiseInverse());
  Matrix best;
  double best_f = std::numeric_limits<double>::infinity();
  const int paf_limit = std::min(opts.max_iterations, 500);
  int iterations = 0;
  for (int it = 0; it < paf_limit; ++it) {
    Matrix reduced = sm;
    reduced.diagonal() = h;
    const EigenPair e = sym_eigen(SymMatrix(reduced));
    Matrix lambda = e.vectors.leftCols(q) * e.values.head(q).cwiseMax(0.0).cwiseSqrt().asDiagonal();
    for (Index i = 0; i < p; ++i) {
      const double comm = lambda.row(i).squaredNorm();
      const double cap = ceiling(i) * (1.0 - 1e-6);
      if (comm > cap) lambda.row(i) *= std::sqrt(cap / comm);
    }
    const double f = minres_objective(s, lambda);
    if (f > best_f) break;
    ++iterations;
    best_f = f;
    best = lambda;
    sol.trace.push_back(f);
    Vector h_next = clamp(lambda.rowwise().squaredNorm());
    const double delta = (h_next - h).cwiseAbs().maxCoeff();
    h = std::move(h_next);
    if (delta < 1e-8) break;
  }

  // First-order polish on the off-diagonal objective itself. Each row is
  // written as L_i = r_i u_i / sqrt(1 + |u_i|^2), which keeps the communality
  // strictly below the Heywood ceiling r_i^2 without bound constraints.
  const Vector radius = ceiling.cwiseSqrt();
  auto to_loadings = [&](const Matrix& u) {
    Matrix l(p, q);
    for (Index i = 0; i < p; ++i) l.row(i) = radius(i) * u.row(i) / std::sqrt(1.0 + u.row(i).squaredNorm());
    return l;
  };
  Matrix u0(p, q);
  for (Index i = 0; i < p; ++i) {
    const double r2 = radius(i) * radius(i);
    u0.row(i) = best.row(i) / std::sqrt(std::max(r2 - best.row(i).squaredNorm(), 1e-300));
  }
  detail::Objective fg = [&](const Vector& x, Vector& g) {
    const auto u = as_matrix(x, p, q);
    const Matrix lam = to_loadings(u);
    const Matrix r = off_diagonal(sm - lam * lam.transpose());
    const Matrix gl = -4.0 * r * lam;
    Matrix gu(p, q);
    for (Index i = 0; i < p; ++i) {
      const double s2 = 1.0 + u.row(i).squaredNorm();
      const double sr = std::sqrt(s2);
      gu.row(i) = radius(i) * (gl.row(i) / sr - u.row(i) * (u.row(i).dot(gl.row(i))) / (s2 * sr));
    }
    g = as_vector(gu);
    return r.squaredNorm();
  };
  FitOptions polish_opts = opts;
  polish_opts.max_iterations = std::max(0, opts.max_iterations - iterations);
  detail::LbfgsResult res = lbfgs_minimize(fg, as_vector(u0), lbfgs_options(polish_opts));
  for (std::size_t k = 1; k < res.trace.size(); ++k) sol.trace.push_back(res.trace[k]);
  Matrix lambda = to_loadings(as_matrix(res.x, p, q));
  for (Index i = 0; i < p; ++i) {
    if (lambda.row(i).squaredNorm() > ceiling(i) - 1e-6) sol.heywood_variables.push_back(i);
  }

  lambda = canonical_orientation(lambda);
  sol.loadings = LoadingMatrix(lambda);
  sol.uniqueness = (sm.diagonal() - lambda.rowwise().squaredNorm()).cwiseMax(0.0);
  sol.objective = minres_objective(s, lambda);
  sol.iterations = iterations + res.iterations;
  sol.converged = res.converged;
  return sol;
}

FactorSolution spfa_fit(const SymMatrix& s, Index q, const SpfaOptions& opts) {
  check_dimensions(s, q);
  const Index p = s.order();
  const SpfaEvaluator ev(s);

  FactorSolution sol;
  sol.method = ExtractionMethod::spfa;
  sol.condition_number = condition_number(s);

  auto gauge_ok = [&](const Matrix& lam) { return std::isfinite(ev.value(lam, nullptr)); };

  Matrix start;
  switch (opts.start) {
    case SpfaStart::given:
      if (opts.start_loadings.rows() != p || opts.start_loadings.cols() != q) {
        throw InputError("SPFA start loadings must be " + std::to_string(p) + "x" + std::to_string(q));
      }
      start = opts.start_loadings;
      if (!gauge_ok(start)) throw RankDeficiencyError("gauge matrix of the SPFA start is singular");
      break;
    case SpfaStart::minres:
      start = minres_fit(s, q, opts).loadings.values;
      if (!gauge_ok(start)) start = principal_axes_start(s, q);
      break;
    case SpfaStart::principal_axes:
      start = principal_axes_start(s, q);
      break;
  }
  if (!gauge_ok(start)) throw RankDeficiencyError("gauge matrix of the SPFA start is singular");
  start = ev.gauge(start);

  detail::Objective fg = [&](const Vector& x, Vector& g) {
    Matrix gm;
    const double f = ev.value(as_matrix(x, p, q), &gm);
    if (std::isfinite(f)) g = as_vector(gm);
    return f;
  };
  detail::Renormalize renorm = [&](Vector& x) {
    const Matrix lam = ev.gauge(as_matrix(x, p, q));
    x = as_vector(lam);
  };
  detail::LbfgsResult res = lbfgs_minimize(fg, as_vector(start), lbfgs_options(opts), renorm);

  Matrix lambda = canonical_orientation(ev.gauge(as_matrix(res.x, p, q)));
  sol.loadings = LoadingMatrix(lambda);
  sol.uniqueness = (s.matrix().diagonal() - lambda.rowwise().squaredNorm()).cwiseMax(0.0);
  sol.objective = ev.value(lambda, nullptr);
  sol.trace = std::move(res.trace);
  sol.iterations = res.iterations;
  sol.converged = res.converged;
  return sol;
}

SymMatrix reproduce_moment(const FactorSolution& solution) {
  const Matrix& l = solution.loadings.values;
  return SymMatrix(l * l.transpose());
}

SymMatrix reproduce_moment(const Matrix& pattern, const Matrix& phi) {
  if (phi.rows() != pattern.cols() || phi.cols() != pattern.cols()) {
    throw InputError("factor correlation matrix does not match the pattern's factor count");
  }
  return SymMatrix(pattern * phi * pattern.transpose());
}

}  // namespace spfa
