#include "spfa/rotation.hpp"

#include <cmath>
#include <limits>

#include "spfa/error.hpp"
#include "spfa/random.hpp"

namespace spfa {

namespace {

struct StartResult {
  Matrix t;
  double f = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  bool usable = false;
  std::vector<double> trace;
};

class CriterionFn {
 public:
  CriterionFn(Criterion c, const Matrix* target) : c_(c), target_(target) {}
  CriterionValue operator()(const Matrix& l) const { return criterion_value_and_gradient(l, c_, target_); }

 private:
  Criterion c_;
  const Matrix* target_;
};

Matrix nearest_orthogonal(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Matrix random_orthonormal(Index q, NormalGenerator& gen) {
  Matrix g(q, q);
  for (Index j = 0; j < q; ++j)
    for (Index i = 0; i < q; ++i) g(i, j) = gen.next();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix qm = qr.householderQ() * Matrix::Identity(q, q);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < q; ++j)
    if (r(j, j) < 0) qm.col(j) *= -1.0;
  return qm;
}

StartResult gpa_orthogonal(const Matrix& a, Matrix t, const CriterionFn& crit, const RotationOptions& opts) {
  StartResult out;
  CriterionValue cv = crit(a * t);
  double f = cv.value;
  Matrix g = a.transpose() * cv.gradient;
  out.trace.push_back(f);
  double alpha = 1.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix m = t.transpose() * g;
    const Matrix gp = g - t * (0.5 * (m + m.transpose()));
    const double s = gp.norm();
    if (s < opts.gradient_tolerance) {
      out.converged = true;
      break;
    }
    alpha *= 2.0;
    Matrix t_new;
    CriterionValue cv_new;
    bool improved = false;
    for (int ls = 0; ls <= 10; ++ls) {
      t_new = nearest_orthogonal(t - alpha * gp);
      cv_new = crit(a * t_new);
      if (cv_new.value < f - 0.5 * s * s * alpha) {
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) {
      if (!(cv_new.value < f)) {
        out.converged = s < std::sqrt(opts.gradient_tolerance);
        break;
      }
    }
    const double delta = f - cv_new.value;
    t = std::move(t_new);
    f = cv_new.value;
    g = a.transpose() * cv_new.gradient;
    out.trace.push_back(f);
    ++out.iterations;
    if (delta < opts.criterion_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.t = std::move(t);
  out.f = f;
  out.usable = std::isfinite(f);
  return out;
}

// Pattern for an oblique transform, or nullopt when T is numerically singular.
std::optional<Matrix> oblique_inverse(const Matrix& t) {
  Eigen::FullPivLU<Matrix> lu(t);
  if (!lu.isInvertible() || std::abs(lu.determinant()) <= 1e-6) return std::nullopt;
  return lu.inverse();
}

Matrix oblique_gradient(const Matrix& l, const Matrix& gq, const Matrix& t_inv) {
  return -(l.transpose() * gq * t_inv).transpose();
}

Matrix normalize_columns(const Matrix& x) {
  return x * x.colwise().norm().cwiseInverse().asDiagonal();
}

StartResult gpa_oblique(const Matrix& a, Matrix t, const CriterionFn& crit, const RotationOptions& opts) {
  StartResult out;
  t = normalize_columns(t);
  auto t_inv = oblique_inverse(t);
  if (!t_inv) return out;
  Matrix l = a * t_inv->transpose();
  CriterionValue cv = crit(l);
  double f = cv.value;
  Matrix g = oblique_gradient(l, cv.gradient, *t_inv);
  out.trace.push_back(f);
  double alpha = 1.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::RowVectorXd d = t.cwiseProduct(g).colwise().sum();
    const Matrix gp = g - t * d.asDiagonal();
    const double s = gp.norm();
    if (s < opts.gradient_tolerance) {
      out.converged = true;
      break;
    }
    alpha *= 2.0;
    Matrix t_new, l_new, t_new_inv;
    CriterionValue cv_new;
    cv_new.value = std::numeric_limits<double>::infinity();
    bool improved = false;
    for (int ls = 0; ls <= 10; ++ls) {
      Matrix cand = normalize_columns(t - alpha * gp);
      auto inv = oblique_inverse(cand);
      if (inv) {
        Matrix lc = a * inv->transpose();
        CriterionValue cvc = crit(lc);
        if (cvc.value < cv_new.value) {
          t_new = cand;
          t_new_inv = *inv;
          l_new = lc;
          cv_new = cvc;
        }
        if (cvc.value < f - 0.5 * s * s * alpha) {
          t_new = std::move(cand);
          t_new_inv = std::move(*inv);
          l_new = std::move(lc);
          cv_new = std::move(cvc);
          improved = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!improved && !(cv_new.value < f)) {
      out.converged = s < std::sqrt(opts.gradient_tolerance);
      break;
    }
    const double delta = f - cv_new.value;
    t = std::move(t_new);
    f = cv_new.value;
    g = oblique_gradient(l_new, cv_new.gradient, t_new_inv);
    out.trace.push_back(f);
    ++out.iterations;
    if (delta < opts.criterion_tolerance) {
      out.converged = true;
      break;
    }
  }
  out.t = std::move(t);
  out.f = f;
  out.usable = std::isfinite(f) && oblique_inverse(out.t).has_value();
  return out;
}

Matrix pattern_for(const Matrix& a, const Matrix& t, RotationMode mode) {
  if (mode == RotationMode::orthogonal) return a * t;
  return a * t.transpose().inverse();
}

// Flips columns so each column's largest absolute loading is positive, and
// applies the same flips to T.
void standardize_signs(Matrix& pattern, Matrix& t) {
  for (Index j = 0; j < pattern.cols(); ++j) {
    Index imax = 0;
    pattern.col(j).cwiseAbs().maxCoeff(&imax);
    if (pattern(imax, j) < 0) {
      pattern.col(j) *= -1.0;
      t.col(j) *= -1.0;
    }
  }
}

double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }
double neg_log1(double x) { return x > 0 ? -(std::log(x) + 1.0) : 0.0; }

CriterionValue varimax(const Matrix& l) {
  const Matrix l2 = l.cwiseAbs2();
  const Matrix centered = l2.rowwise() - l2.colwise().mean();
  return {-centered.squaredNorm() / 4.0, -l.cwiseProduct(centered)};
}

CriterionValue infomax(const Matrix& l) {
  const Index p = l.rows();
  const Index k = l.cols();
  const Matrix sq = l.cwiseAbs2();
  const double s = sq.sum();
  if (!(s > 0)) throw DegenerateInputError("infomax criterion is undefined for all-zero loadings");
  const Vector s1 = sq.rowwise().sum();
  const Eigen::RowVectorXd s2 = sq.colwise().sum();

  double q0 = 0, q1 = 0, q2 = 0;
  Matrix h(p, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < p; ++i) {
      const double e = sq(i, j) / s;
      q0 -= xlogx(e);
      h(i, j) = neg_log1(e);
    }
  Vector h1(p);
  for (Index i = 0; i < p; ++i) {
    q1 -= xlogx(s1(i) / s);
    h1(i) = neg_log1(s1(i) / s);
  }
  Eigen::RowVectorXd h2(k);
  for (Index j = 0; j < k; ++j) {
    q2 -= xlogx(s2(j) / s);
    h2(j) = neg_log1(s2(j) / s);
  }
  const double alpha0 = sq.cwiseProduct(h).sum();
  const double alpha1 = s1.dot(h1);
  const double alpha2 = s2.dot(h2);
  const double s_sq = s * s;

  Matrix g(p, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < p; ++i) {
      const double g0 = h(i, j) / s - alpha0 / s_sq;
      const double g1 = h1(i) / s - alpha1 / s_sq;
      const double g2 = h2(j) / s - alpha2 / s_sq;
      g(i, j) = 2.0 * l(i, j) * (g0 - g1 - g2);
    }
  return {std::log(static_cast<double>(k)) + q0 - q1 - q2, std::move(g)};
}

CriterionValue target_ls(const Matrix& l, const Matrix& target) {
  if (target.rows() != l.rows() || target.cols() != l.cols()) {
    throw InputError("target matrix must be " + std::to_string(l.rows()) + "x" + std::to_string(l.cols()));
  }
  const Matrix d = l - target;
  return {d.squaredNorm(), 2.0 * d};
}

}  // namespace

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::varimax: return "varimax";
    case Criterion::parsimax: return "parsimax";
    case Criterion::infomax: return "infomax";
    case Criterion::target: return "target";
  }
  return "unknown";
}

std::string to_string(RotationMode m) { return m == RotationMode::orthogonal ? "orthogonal" : "oblique"; }

Criterion parse_criterion(const std::string& name) {
  if (name == "varimax") return Criterion::varimax;
  if (name == "parsimax") return Criterion::parsimax;
  if (name == "infomax") return Criterion::infomax;
  if (name == "target") return Criterion::target;
  throw InputError("unknown rotation criterion '" + name + "' (expected varimax, parsimax, infomax or target)");
}

RotationMode parse_rotation_mode(const std::string& name) {
  if (name == "orthogonal") return RotationMode::orthogonal;
  if (name == "oblique") return RotationMode::oblique;
  throw InputError("unknown rotation mode '" + name + "' (expected orthogonal or oblique)");
}

double parsimax_kappa(Index p, Index q) {
  return static_cast<double>(q - 1) / static_cast<double>(p + q - 2);
}

CriterionValue crawford_ferguson(const Matrix& l, double kappa) {
  const Matrix l2 = l.cwiseAbs2();
  // Row part: sum over pairs of distinct columns, via (row sum)^2 - sum of squares.
  const Vector row_sum = l2.rowwise().sum();
  const Eigen::RowVectorXd col_sum = l2.colwise().sum();
  const Matrix row_other = (-l2).colwise() + row_sum;  // sum_{l != j} L2(i,l)
  const Matrix col_other = (-l2).rowwise() + col_sum;  // sum_{m != i} L2(m,j)
  const double f1 = (1.0 - kappa) * l2.cwiseProduct(row_other).sum() / 4.0;
  const double f2 = kappa * l2.cwiseProduct(col_other).sum() / 4.0;
  Matrix g = (1.0 - kappa) * l.cwiseProduct(row_other) + kappa * l.cwiseProduct(col_other);
  return {f1 + f2, std::move(g)};
}

CriterionValue criterion_value_and_gradient(const Matrix& l, Criterion criterion, const Matrix* target) {
  if (!l.allFinite()) throw InputError("rotation criterion needs finite loadings");
  switch (criterion) {
    case Criterion::varimax: return varimax(l);
    case Criterion::parsimax: return crawford_ferguson(l, parsimax_kappa(l.rows(), l.cols()));
    case Criterion::infomax: return infomax(l);
    case Criterion::target:
      if (target == nullptr) throw InputError("target rotation needs a target matrix");
      return target_ls(l, *target);
  }
  throw InputError("unknown rotation criterion");
}

RotationSolution identity_rotation(const LoadingMatrix& lambda, Criterion criterion, RotationMode mode) {
  RotationSolution sol;
  const Index q = lambda.cols();
  sol.pattern = lambda;
  sol.transform = Matrix::Identity(q, q);
  sol.phi = Matrix::Identity(q, q);
  sol.criterion = criterion;
  sol.mode = mode;
  sol.converged = true;
  if (criterion != Criterion::target && q > 0) {
    sol.criterion_value = criterion_value_and_gradient(lambda.values, criterion).value;
    sol.trace.push_back(sol.criterion_value);
  }
  return sol;
}

RotationSolution rotate(const LoadingMatrix& lambda, Criterion criterion, RotationMode mode,
                        const RotationOptions& opts, const Matrix& target) {
  const Index p = lambda.rows();
  const Index q = lambda.cols();
  if (q < 1 || p < 1) throw InputError("cannot rotate an empty loading matrix");
  if (!lambda.values.allFinite()) throw InputError("loadings contain non-finite values");
  if (criterion == Criterion::target && (target.rows() != p || target.cols() != q)) {
    throw InputError("target matrix must be " + std::to_string(p) + "x" + std::to_string(q));
  }

  Matrix a = lambda.values;
  Vector row_scale = Vector::Ones(p);
  if (opts.kaiser_normalize) {
    row_scale = a.rowwise().norm();
    for (Index i = 0; i < p; ++i)
      if (!(row_scale(i) > 0)) row_scale(i) = 1.0;
    a = row_scale.cwiseInverse().asDiagonal() * a;
  }
  Matrix scaled_target;
  const Matrix* target_ptr = nullptr;
  if (criterion == Criterion::target) {
    scaled_target = row_scale.cwiseInverse().asDiagonal() * target;
    target_ptr = &scaled_target;
  }
  const CriterionFn crit(criterion, target_ptr);

  StartResult best;
  int best_index = -1;
  if (q == 1) {
    best.t = Matrix::Identity(1, 1);
    best.f = criterion == Criterion::infomax ? 0.0 : crit(a).value;
    best.converged = true;
    best.usable = true;
    best.trace.push_back(best.f);
    best_index = 0;
  } else if (criterion == Criterion::target && mode == RotationMode::orthogonal) {
    // Orthogonal Procrustes: T = U V' from the SVD of A' * target.
    best.t = nearest_orthogonal(a.transpose() * scaled_target);
    best = gpa_orthogonal(a, best.t, crit, opts);
    best_index = 0;
  } else {
    if (mode == RotationMode::orthogonal && !(a.norm() > 0) && criterion == Criterion::infomax) {
      throw DegenerateInputError("infomax criterion is undefined for all-zero loadings");
    }
    NormalGenerator gen(derive_seed(opts.seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(q)}));
    for (int start = 0; start <= opts.random_starts; ++start) {
      const Matrix t0 = start == 0 ? Matrix::Identity(q, q) : random_orthonormal(q, gen);
      StartResult r = mode == RotationMode::orthogonal ? gpa_orthogonal(a, t0, crit, opts)
                                                       : gpa_oblique(a, t0, crit, opts);
      if (!r.usable) continue;
      const bool better = best_index < 0 || (r.converged && !best.converged) ||
                          (r.converged == best.converged && r.f < best.f - 1e-12);
      if (better) {
        best = std::move(r);
        best_index = start;
      }
    }
    if (best_index < 0) {
      throw NumericalError("oblique rotation failed: transformation matrix singular on every start");
    }
  }

  RotationSolution sol;
  sol.transform = best.t;
  Matrix pattern = pattern_for(a, sol.transform, mode);
  pattern = row_scale.asDiagonal() * pattern;
  // Target rotation takes its column signs from the target.
  if (criterion != Criterion::target) standardize_signs(pattern, sol.transform);
  sol.pattern = LoadingMatrix(std::move(pattern), lambda.variables, lambda.factors);
  sol.phi = mode == RotationMode::orthogonal ? Matrix::Identity(q, q)
                                             : Matrix(sol.transform.transpose() * sol.transform);
  sol.criterion = criterion;
  sol.mode = mode;
  sol.criterion_value = criterion == Criterion::target
                            ? criterion_value_and_gradient(sol.pattern.values, criterion, &target).value
                            : (q == 1 && criterion == Criterion::infomax
                                   ? 0.0
                                   : criterion_value_and_gradient(sol.pattern.values, criterion).value);
  sol.random_start_index = best_index;
  sol.iterations = best.iterations;
  sol.converged = best.converged;
  sol.trace = std::move(best.trace);
  return sol;
}

}  // namespace spfa
