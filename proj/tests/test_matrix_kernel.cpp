#include <gtest/gtest.h>

#include <random>

#include "spfa/error.hpp"
#include "spfa/matrix_kernel.hpp"
#include "spfa/random.hpp"
#include "spfa/simulation.hpp"

using namespace spfa;

namespace {

Matrix random_spd(Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix a(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j) a(i, j) = z(rng);
  return a * a.transpose() + 0.5 * Matrix::Identity(p, p);
}

}  // namespace

TEST(SymMatrix, RejectsAsymmetricInput) {
  Matrix m(2, 2);
  m << 1, 0.5, 0.4, 1;
  EXPECT_THROW(SymMatrix{m}, InputError);
  Matrix r(2, 3);
  EXPECT_THROW(SymMatrix{r}, InputError);
}

TEST(SymMatrix, SymmetrizesRoundingNoise) {
  Matrix m(2, 2);
  m << 1, 0.5, 0.5 + 1e-14, 1;
  SymMatrix s(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
}

TEST(SymEigen, Identity) {
  EigenPair e = sym_eigen(SymMatrix::identity(3));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(e.values(i), 1.0, 1e-14);
  EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(3, 3)).norm(), 1e-12);
}

TEST(SymEigen, DiagonalDescending) {
  Vector d(2);
  d << 1, 4;
  EigenPair e = sym_eigen(SymMatrix::diagonal(d));
  EXPECT_DOUBLE_EQ(e.values(0), 4.0);
  EXPECT_DOUBLE_EQ(e.values(1), 1.0);
  EXPECT_NEAR(std::abs(e.vectors(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(e.vectors(0, 1)), 1.0, 1e-14);
}

TEST(SymEigen, TwoByTwoByHand) {
  // (2-x)^2 - 1 = 0 -> x = 3, 1
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  EigenPair e = sym_eigen(SymMatrix(m));
  EXPECT_NEAR(e.values(0), 3.0, 1e-14);
  EXPECT_NEAR(e.values(1), 1.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), r, 1e-12);
  EXPECT_NEAR(e.vectors(0, 0) * e.vectors(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(e.vectors(0, 1) * e.vectors(1, 1), -0.5, 1e-12);
}

TEST(SymEigen, NonFiniteIsInputError) {
  Matrix m = Matrix::Identity(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sym_eigen(SymMatrix(m)), InputError);
}

TEST(SymEigen, ReconstructsIllConditioned) {
  std::mt19937_64 rng(7);
  Matrix q = Eigen::HouseholderQR<Matrix>(random_spd(8, rng)).householderQ();
  Vector d(8);
  for (Index i = 0; i < 8; ++i) d(i) = std::pow(10.0, -8.0 * i / 7.0);
  Matrix a = q * d.asDiagonal() * q.transpose();
  EigenPair e = sym_eigen(SymMatrix(a));
  Matrix back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((back - SymMatrix(a).matrix()).norm() / a.norm(), 1e-8);
}

TEST(SymSqrt, DiagonalCases) {
  Vector d(2);
  d << 4, 9;
  SymMatrix plus = sym_sqrt(SymMatrix::diagonal(d), SqrtKind::plus_half);
  SymMatrix minus = sym_sqrt(SymMatrix::diagonal(d), SqrtKind::minus_half);
  EXPECT_NEAR(plus(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(plus(1, 1), 3.0, 1e-14);
  EXPECT_NEAR(plus(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(minus(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(minus(1, 1), 1.0 / 3.0, 1e-14);
}

TEST(SymSqrt, SquareReproducesInput) {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  SymMatrix r = sym_sqrt(SymMatrix(m), SqrtKind::plus_half);
  EXPECT_LT((r.matrix() * r.matrix() - m).norm(), 1e-12);
}

TEST(SymSqrt, RandomSpdProperties) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    SymMatrix a(random_spd(6, rng));
    SymMatrix plus = sym_sqrt(a, SqrtKind::plus_half);
    SymMatrix minus = sym_sqrt(a, SqrtKind::minus_half);
    EXPECT_LT((plus.matrix() * plus.matrix() - a.matrix()).norm() / a.matrix().norm(), 1e-8);
    EXPECT_LT((minus.matrix() * a.matrix() * minus.matrix() - Matrix::Identity(6, 6)).norm(), 1e-8);
    EXPECT_LT((minus.matrix() - sym_inverse(plus).matrix()).norm(), 1e-8);
  }
}

TEST(SymSqrt, SingularMinusHalfThrows) {
  Vector d(2);
  d << 1, 0;
  EXPECT_THROW(sym_sqrt(SymMatrix::diagonal(d), SqrtKind::minus_half), SingularityError);
  d << 1, -0.5;
  EXPECT_THROW(sym_sqrt(SymMatrix::diagonal(d), SqrtKind::plus_half), Error);
}

TEST(SymInverse, Cases) {
  EXPECT_LT((sym_inverse(SymMatrix::identity(3)).matrix() - Matrix::Identity(3, 3)).norm(), 1e-15);
  Vector d(2);
  d << 2, 4;
  SymMatrix inv = sym_inverse(SymMatrix::diagonal(d));
  EXPECT_DOUBLE_EQ(inv(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(inv(1, 1), 0.25);
  std::mt19937_64 rng(3);
  SymMatrix a(random_spd(5, rng));
  EXPECT_LT((a.matrix() * sym_inverse(a).matrix() - Matrix::Identity(5, 5)).norm(), 1e-8);
}

TEST(SymInverse, NearSingularThrows) {
  Matrix m(2, 2);
  m << 1, 1, 1, 1 + 1e-13;
  EXPECT_THROW(sym_inverse(SymMatrix(m)), SingularityError);
}

TEST(SampleMoment, CovarianceByHand) {
  Matrix x(2, 2);
  x << 1, 2, -1, -2;
  SymMatrix s = sample_moment_matrix(x, MomentMode::covariance);
  EXPECT_DOUBLE_EQ(s(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(s(0, 1), 4.0);
  EXPECT_DOUBLE_EQ(s(1, 1), 8.0);
}

TEST(SampleMoment, PerfectCorrelation) {
  Matrix x(4, 2);
  x << 1, 3, 2, 5, 4, 9, 7, 15;
  SymMatrix r = sample_moment_matrix(x, MomentMode::correlation);
  EXPECT_NEAR(r(0, 1), 1.0, 1e-12);
  EXPECT_EQ(r(0, 0), 1.0);
  EXPECT_EQ(r(1, 1), 1.0);
  EXPECT_TRUE(r.is_correlation());
}

TEST(SampleMoment, ConstantColumnNamed) {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  std::vector<std::string> names{"height", "flat"};
  try {
    sample_moment_matrix(x, MomentMode::correlation, names);
    FAIL() << "expected DegenerateInputError";
  } catch (const DegenerateInputError& e) {
    EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
  }
  EXPECT_NO_THROW(sample_moment_matrix(x, MomentMode::covariance));
}

TEST(SampleMoment, MonteCarloMatchesImpliedMatrix) {
  const PopulationSpec pop = build_population(2, 0.70);
  const Matrix data = generate_sample(pop, 1000, 99);
  const SymMatrix s = sample_moment_matrix(data, MomentMode::covariance);
  const SymMatrix sigma = population_moment(pop);
  // Entrywise sampling SD is at most about sqrt(2/n) = 0.045.
  EXPECT_LT((s.matrix() - sigma.matrix()).cwiseAbs().maxCoeff(), 0.2);
  EXPECT_NEAR(s(0, 1), 0.21, 0.15);
}
