#pragma once

// Dense symmetric linear algebra shared by the fitting, rotation and scoring
// code. Everything here is a pure function of its arguments.

#include <span>
#include <string>

#include <Eigen/Dense>

namespace spfa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Square matrix whose (i,j) and (j,i) entries are bit-identical. Inputs that
// are symmetric up to rounding are averaged with their transpose; anything
// further off is rejected.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Index order);
  static SymMatrix diagonal(const Vector& d);

  Index order() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

  // Unit diagonal within 1e-12.
  bool is_correlation() const;

 private:
  Matrix m_;
};

// Eigenvalues in descending order with matching orthonormal eigenvectors as
// columns.
struct EigenPair {
  Vector values;
  Matrix vectors;
};

enum class SqrtKind { plus_half, minus_half };

enum class MomentMode { covariance, correlation };

// Eigenvalues at or below this are treated as zero: 1e-10 times the largest
// eigenvalue magnitude.
double singularity_threshold(const Vector& eigenvalues);

EigenPair sym_eigen(const SymMatrix& a);

// plus_half: R with R*R == a. minus_half: R with R*a*R == I.
SymMatrix sym_sqrt(const SymMatrix& a, SqrtKind kind);

SymMatrix sym_inverse(const SymMatrix& a);

// Unbiased (n-1) covariance of the columns of `data`, or the correlation
// matrix with an exactly unit diagonal. `names` labels columns in error
// messages and may be empty.
SymMatrix sample_moment_matrix(const Matrix& data, MomentMode mode,
                               std::span<const std::string> names = {});

// Convenience wrappers for the q x q gauge matrices that show up everywhere.
Matrix inverse_sqrt(const Matrix& a);
Matrix spd_inverse(const Matrix& a);

}  // namespace spfa
