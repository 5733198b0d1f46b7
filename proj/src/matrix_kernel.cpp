#include "spfa/matrix_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spfa/error.hpp"

namespace spfa {

namespace {

std::string column_label(std::span<const std::string> names, Index j) {
  if (static_cast<std::size_t>(j) < names.size()) return names[j];
  return "column " + std::to_string(j + 1);
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw InputError("symmetric matrix must be square, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  // NaN compares false, so non-finite input passes here and is caught by the
  // operations that require finiteness.
  if (asym > 1e-9 * scale) {
    std::ostringstream msg;
    msg << "matrix is not symmetric (max asymmetry " << asym << ")";
    throw InputError(msg.str());
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Index order) { return SymMatrix(Matrix::Identity(order, order)); }

SymMatrix SymMatrix::diagonal(const Vector& d) { return SymMatrix(Matrix(d.asDiagonal())); }

bool SymMatrix::is_correlation() const {
  return order() > 0 && (m_.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12;
}

double singularity_threshold(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0) return 0.0;
  return 1e-10 * eigenvalues.cwiseAbs().maxCoeff();
}

EigenPair sym_eigen(const SymMatrix& a) {
  const Matrix& m = a.matrix();
  if (!m.allFinite()) throw InputError("sym_eigen: matrix has non-finite entries");
  // Tridiagonalization followed by implicit symmetric QR.
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eigen: symmetric QR failed to converge (max " +
                         std::to_string(Eigen::SelfAdjointEigenSolver<Matrix>::m_maxIterations *
                                        m.rows()) +
                         " iterations)");
  }
  const Index n = m.rows();
  EigenPair out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

SymMatrix sym_sqrt(const SymMatrix& a, SqrtKind kind) {
  EigenPair e = sym_eigen(a);
  const double eps = singularity_threshold(e.values);
  const Index n = a.order();
  Vector d(n);
  for (Index k = 0; k < n; ++k) {
    const double v = e.values(k);
    if (kind == SqrtKind::minus_half) {
      if (v <= eps) {
        std::ostringstream msg;
        msg << "inverse square root of singular matrix: eigenvalue " << v << " <= " << eps;
        throw SingularityError(msg.str());
      }
      d(k) = 1.0 / std::sqrt(v);
    } else {
      if (v < -eps) {
        std::ostringstream msg;
        msg << "square root of indefinite matrix: eigenvalue " << v;
        throw SingularityError(msg.str());
      }
      d(k) = std::sqrt(std::max(v, 0.0));
    }
  }
  return SymMatrix(e.vectors * d.asDiagonal() * e.vectors.transpose());
}

SymMatrix sym_inverse(const SymMatrix& a) {
  EigenPair e = sym_eigen(a);
  const Index n = a.order();
  const double eps = singularity_threshold(e.values);
  const double smallest = n > 0 ? e.values(n - 1) : 1.0;
  if (n > 0 && smallest <= eps) {
    std::ostringstream msg;
    msg << "matrix is singular or not positive definite: smallest eigenvalue " << smallest
        << ", condition number " << (smallest > 0 ? e.values(0) / smallest : INFINITY);
    throw SingularityError(msg.str());
  }
  Vector d = e.values.cwiseInverse();
  return SymMatrix(e.vectors * d.asDiagonal() * e.vectors.transpose());
}

SymMatrix sample_moment_matrix(const Matrix& data, MomentMode mode,
                               std::span<const std::string> names) {
  const Index n = data.rows();
  const Index p = data.cols();
  if (n < 2) throw InputError("sample moment matrix needs at least 2 rows, got " + std::to_string(n));
  if (p < 1) throw InputError("sample moment matrix needs at least 1 column");
  if (!data.allFinite()) throw InputError("data contain non-finite values");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Matrix centered = data.rowwise() - mean;
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  if (mode == MomentMode::covariance) return SymMatrix(cov);

  Vector sd(p);
  for (Index j = 0; j < p; ++j) {
    const double scale = 1.0 + data.col(j).cwiseAbs().maxCoeff();
    if (!(cov(j, j) > 1e-24 * scale * scale)) {
      throw DegenerateInputError("constant column '" + column_label(names, j) +
                                 "' has zero variance; correlation is undefined");
    }
    sd(j) = std::sqrt(cov(j, j));
  }
  Matrix cor = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  cor.diagonal().setOnes();
  return SymMatrix(cor);
}

Matrix inverse_sqrt(const Matrix& a) { return sym_sqrt(SymMatrix(a), SqrtKind::minus_half).matrix(); }

Matrix spd_inverse(const Matrix& a) { return sym_inverse(SymMatrix(a)).matrix(); }

}  // namespace spfa
