#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spfa/error.hpp"
#include "spfa/extraction.hpp"
#include "spfa/rotation.hpp"
#include "spfa/simulation.hpp"

using namespace spfa;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> z;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = scale * z(rng);
  return m;
}

Matrix givens(double degrees) {
  const double t = degrees * std::acos(-1.0) / 180.0;
  Matrix r(2, 2);
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

// Crawford-Ferguson written out with explicit loops:
// (1-k) sum_i sum_{j!=l} a_ij^2 a_il^2 + k sum_j sum_{i!=m} a_ij^2 a_mj^2, all over 4.
double cf_loops(const Matrix& a, double kappa) {
  double rows = 0.0, cols = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index l = 0; l < a.cols(); ++l)
        if (l != j) rows += a(i, j) * a(i, j) * a(i, l) * a(i, l);
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      for (Index m = 0; m < a.rows(); ++m)
        if (m != i) cols += a(i, j) * a(i, j) * a(m, j) * a(m, j);
  return ((1 - kappa) * rows + kappa * cols) / 4.0;
}

double raw_varimax(const Matrix& a) {
  // Sum over columns of the variance (divisor p) of squared loadings.
  double v = 0.0;
  for (Index j = 0; j < a.cols(); ++j) {
    const Vector sq = a.col(j).array().square();
    v += (sq.array() - sq.mean()).square().sum() / static_cast<double>(a.rows());
  }
  return v;
}

Matrix fd_gradient(const Matrix& l, Criterion c, const Matrix* target) {
  const double h = 1e-7;
  Matrix g(l.rows(), l.cols());
  for (Index i = 0; i < l.rows(); ++i)
    for (Index j = 0; j < l.cols(); ++j) {
      Matrix up = l, down = l;
      up(i, j) += h;
      down(i, j) -= h;
      g(i, j) = (criterion_value_and_gradient(up, c, target).value -
                 criterion_value_and_gradient(down, c, target).value) /
                (2 * h);
    }
  return g;
}

double min_abs_congruence(const Matrix& a, const Matrix& b) {
  const Alignment al = align_to_population(a, b);
  return al.congruence.minCoeff();
}

}  // namespace

TEST(Criteria, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 10; ++t) {
    const Matrix l = random_matrix(12, 3, rng);
    const Matrix target = random_matrix(12, 3, rng);
    for (Criterion c : {Criterion::varimax, Criterion::parsimax, Criterion::infomax, Criterion::target}) {
      const Matrix g = criterion_value_and_gradient(l, c, &target).gradient;
      const Matrix fd = fd_gradient(l, c, &target);
      EXPECT_LT((g - fd).norm() / std::max(fd.norm(), 1e-3), 1e-5) << to_string(c) << " point " << t;
    }
  }
}

TEST(Criteria, ParsimaxKappaAndIndependentCf) {
  EXPECT_DOUBLE_EQ(parsimax_kappa(20, 2), 1.0 / 20.0);
  std::mt19937_64 rng(43);
  const Matrix l = random_matrix(20, 2, rng);
  EXPECT_NEAR(criterion_value_and_gradient(l, Criterion::parsimax).value, cf_loops(l, 1.0 / 20.0), 1e-12);
  EXPECT_NEAR(crawford_ferguson(l, 0.3).value, cf_loops(l, 0.3), 1e-12);
}

TEST(Criteria, VarimaxIsNegatedColumnVarianceUpToConstant) {
  std::mt19937_64 rng(47);
  const Matrix a = random_matrix(10, 3, rng);
  const double va = criterion_value_and_gradient(a, Criterion::varimax).value;
  // Compare two matrices so the (unknown) scale factor cancels in the ratio.
  Matrix c = a;
  c.col(0) *= 1.5;
  const double vc = criterion_value_and_gradient(c, Criterion::varimax).value;
  EXPECT_NEAR(va / vc, raw_varimax(a) / raw_varimax(c), 1e-12);
  EXPECT_LT(va, 0.0);
}

TEST(Criteria, InfomaxAllZeroIsDegenerate) {
  EXPECT_THROW(criterion_value_and_gradient(Matrix::Zero(4, 2), Criterion::infomax), DegenerateInputError);
}

TEST(Criteria, TargetNeedsMatrix) {
  EXPECT_THROW(criterion_value_and_gradient(Matrix::Ones(4, 2), Criterion::target, nullptr), InputError);
}

TEST(Criteria, VarimaxPrefersSimpleStructure) {
  Matrix simple = Matrix::Zero(4, 2);
  simple(0, 0) = simple(1, 0) = 0.8;
  simple(2, 1) = simple(3, 1) = 0.7;
  const double v0 = criterion_value_and_gradient(simple, Criterion::varimax).value;
  for (double deg : {5.0, 15.0, 30.0, 45.0, 70.0}) {
    EXPECT_GT(criterion_value_and_gradient(simple * givens(deg), Criterion::varimax).value, v0 - 1e-15);
  }
}

TEST(Rotate, PopulationIsAVarimaxFixedPoint) {
  const PopulationSpec pop = build_population(2, 0.70);
  const RotationSolution r = rotate(pop.loadings, Criterion::varimax, RotationMode::orthogonal);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(min_abs_congruence(r.pattern.values, pop.loadings.values), 1.0, 1e-10);
}

TEST(Rotate, RecoversKnownRotation) {
  Matrix a(4, 2);
  a << 0.8, 0.0, 0.7, 0.0, 0.0, 0.6, 0.0, 0.9;
  const LoadingMatrix rotated(a * givens(30));
  const RotationSolution r = rotate(rotated, Criterion::varimax, RotationMode::orthogonal);
  const Alignment al = align_to_population(r.pattern.values, a);
  EXPECT_LT((apply_alignment(r.pattern.values, al) - a).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Rotate, OrthogonalInvariants) {
  std::mt19937_64 rng(53);
  const Matrix a = random_matrix(15, 3, rng);
  for (Criterion c : {Criterion::varimax, Criterion::parsimax, Criterion::infomax}) {
    const RotationSolution r = rotate(LoadingMatrix(a), c, RotationMode::orthogonal);
    const Matrix& t = r.transform;
    EXPECT_LT((t.transpose() * t - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(r.phi, Matrix::Identity(3, 3));
    EXPECT_LT((r.pattern.values * t.transpose() - a).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix lr = r.pattern.values;
    EXPECT_LT((lr * lr.transpose() - a * a.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1] + 1e-14);
    // Largest-magnitude loading of each column is positive.
    for (Index j = 0; j < 3; ++j) {
      Index imax = 0;
      lr.col(j).cwiseAbs().maxCoeff(&imax);
      EXPECT_GT(lr(imax, j), 0.0);
    }
  }
}

TEST(Rotate, ObliqueInvariants) {
  std::mt19937_64 rng(59);
  const Matrix a = random_matrix(15, 3, rng);
  for (Criterion c : {Criterion::varimax, Criterion::parsimax, Criterion::infomax}) {
    const RotationSolution r = rotate(LoadingMatrix(a), c, RotationMode::oblique);
    const Matrix& t = r.transform;
    EXPECT_LT(((t.transpose() * t).diagonal().array() - 1.0).abs().maxCoeff(), 1e-10);
    EXPECT_LT((r.phi - t.transpose() * t).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(std::abs(t.determinant()), 1e-6);
    EXPECT_LT((r.pattern.values - a * t.transpose().inverse()).cwiseAbs().maxCoeff(), 1e-8);
    const Matrix& lp = r.pattern.values;
    EXPECT_LT((lp * r.phi * lp.transpose() - a * a.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Rotate, Idempotent) {
  std::mt19937_64 rng(61);
  const Matrix a = random_matrix(12, 3, rng);
  for (Criterion c : {Criterion::varimax, Criterion::parsimax, Criterion::infomax}) {
    const RotationSolution r1 = rotate(LoadingMatrix(a), c, RotationMode::orthogonal);
    const RotationSolution r2 = rotate(r1.pattern, c, RotationMode::orthogonal);
    EXPECT_LT(std::abs(r2.criterion_value - r1.criterion_value), 1e-10) << to_string(c);
  }
}

TEST(Rotate, TargetBeatsAnalyticCriteriaOnSample) {
  const PopulationSpec pop = build_population(3, 0.60);
  const Matrix data = generate_sample(pop, 200, 4242);
  const FactorSolution sol = minres_fit(sample_moment_matrix(data, MomentMode::correlation), 3);
  const RotationSolution tr =
      rotate(sol.loadings, Criterion::target, RotationMode::orthogonal, {}, pop.loadings.values);
  const double target_mean = align_to_population(tr.pattern.values, pop.loadings.values).congruence.mean();
  for (Criterion c : {Criterion::varimax, Criterion::parsimax, Criterion::infomax}) {
    const RotationSolution r = rotate(sol.loadings, c, RotationMode::orthogonal);
    EXPECT_GE(target_mean + 1e-9, align_to_population(r.pattern.values, pop.loadings.values).congruence.mean());
  }
}

TEST(Rotate, TargetObliqueReachesExactTarget) {
  std::mt19937_64 rng(67);
  Matrix h = Matrix::Zero(9, 3);
  for (Index j = 0; j < 3; ++j) h.block(3 * j, j, 3, 1) << 0.8, 0.7, 0.6;
  Matrix t(3, 3);
  t << 1, 0.3, 0.2, 0, 1, 0.4, 0, 0, 1;
  t.colwise().normalize();
  // A = H T' is an orthogonal-looking start whose oblique rotation back is exactly H.
  const Matrix a = h * t.transpose();
  const RotationSolution r = rotate(LoadingMatrix(a), Criterion::target, RotationMode::oblique, {}, h);
  EXPECT_LT((r.pattern.values - h).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Rotate, SingleFactorIsIdentity) {
  Matrix a(4, 1);
  a << -0.5, -0.7, 0.2, -0.1;
  const RotationSolution r = rotate(LoadingMatrix(a), Criterion::varimax, RotationMode::orthogonal);
  EXPECT_NEAR(std::abs(r.transform(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(r.pattern.values(1, 0), 0.7, 1e-15);
}

TEST(Rotate, DeterministicForSeed) {
  std::mt19937_64 rng(71);
  const Matrix a = random_matrix(20, 4, rng);
  RotationOptions o;
  o.seed = 99;
  const RotationSolution r1 = rotate(LoadingMatrix(a), Criterion::infomax, RotationMode::oblique, o);
  const RotationSolution r2 = rotate(LoadingMatrix(a), Criterion::infomax, RotationMode::oblique, o);
  EXPECT_EQ(r1.pattern.values, r2.pattern.values);
  EXPECT_EQ(r1.random_start_index, r2.random_start_index);
}

TEST(Rotate, KaiserNormalizationPreservesReproducedMatrix) {
  std::mt19937_64 rng(73);
  const Matrix a = random_matrix(12, 3, rng);
  RotationOptions o;
  o.kaiser_normalize = true;
  const RotationSolution r = rotate(LoadingMatrix(a), Criterion::varimax, RotationMode::orthogonal, o);
  const Matrix& lr = r.pattern.values;
  EXPECT_LT((lr * lr.transpose() - a * a.transpose()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Rotate, Parsing) {
  EXPECT_EQ(parse_criterion("parsimax"), Criterion::parsimax);
  EXPECT_EQ(parse_rotation_mode("oblique"), RotationMode::oblique);
  EXPECT_THROW(parse_criterion("promax"), InputError);
}
