#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "spfa/error.hpp"
#include "spfa/random.hpp"
#include "spfa/report.hpp"
#include "spfa/simulation.hpp"

using namespace spfa;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = z(rng);
  return m;
}

// Best sum of |congruence| over all q! column assignments.
double brute_force_best(const Matrix& sample, const Matrix& pop) {
  std::vector<Index> perm(static_cast<std::size_t>(pop.cols()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1.0;
  do {
    double sum = 0.0;
    for (Index j = 0; j < pop.cols(); ++j) sum += std::abs(tucker_congruence(pop.col(j), sample.col(perm[j])));
    best = std::max(best, sum);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

GridConfig small_grid() {
  GridConfig cfg;
  cfg.conditions = {{0.70, 2, 100}};
  cfg.replications = 3;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST(Population, TwoFactorLayout) {
  const PopulationSpec pop = build_population(2, 0.70);
  const Matrix& l = pop.loadings.values;
  ASSERT_EQ(l.rows(), 20);
  ASSERT_EQ(l.cols(), 2);
  EXPECT_EQ(l(0, 0), 0.70);
  EXPECT_EQ(l(1, 0), 0.30);
  EXPECT_EQ(l(2, 0), 0.30);
  EXPECT_EQ(l(10, 1), 0.70);
  EXPECT_EQ(l(11, 1), 0.30);
  EXPECT_EQ(l(12, 1), 0.30);
  for (Index j = 0; j < 2; ++j) {
    EXPECT_EQ((l.col(j).array() == 0.70).count(), 1);
    EXPECT_EQ((l.col(j).array() == 0.30).count(), 2);
    EXPECT_EQ((l.col(j).array() == 0.0).count(), 17);
  }
  for (Index i = 0; i < 20; ++i) EXPECT_LE((l.row(i).array() != 0.0).count(), 1);
  EXPECT_EQ(pop.salient_index, (std::vector<Index>{0, 10}));
  EXPECT_TRUE(pop.salient_dominant);
}

TEST(Population, SingleBlock) {
  const PopulationSpec pop = build_population(1, 0.50);
  Vector expected = Vector::Zero(10);
  expected.head(3) << 0.50, 0.30, 0.30;
  EXPECT_EQ(pop.loadings.values.col(0), expected);
}

TEST(Population, WeakSalientStillBuilt) {
  const PopulationSpec pop = build_population(2, 0.25);
  EXPECT_FALSE(pop.salient_dominant);
  EXPECT_EQ(pop.loadings.values(0, 0), 0.25);
  EXPECT_THROW(build_population(0, 0.5), InputError);
}

TEST(Population, ImpliedMoments) {
  const SymMatrix sigma = population_moment(build_population(2, 0.70));
  EXPECT_NEAR(sigma(0, 1), 0.21, 1e-15);
  EXPECT_EQ(sigma(0, 10), 0.0);
  EXPECT_EQ(sigma(5, 5), 1.0);
  const Vector psi = population_unique_weights(build_population(2, 0.70));
  EXPECT_NEAR(psi(0), std::sqrt(1 - 0.49), 1e-15);
  EXPECT_EQ(psi(5), 1.0);
}

TEST(Random, BoxMullerFromIndependentUniforms) {
  NormalGenerator gen(123);
  std::mt19937_64 engine(123);
  for (int k = 0; k < 5; ++k) {
    const double u1 = (static_cast<double>(engine() >> 11) + 1.0) / 9007199254740992.0;
    const double u2 = (static_cast<double>(engine() >> 11) + 1.0) / 9007199254740992.0;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586;
    EXPECT_DOUBLE_EQ(gen.next(), r * std::cos(two_pi * u2));
    EXPECT_DOUBLE_EQ(gen.next(), r * std::sin(two_pi * u2));
  }
}

TEST(Random, SeedsDifferAcrossParts) {
  EXPECT_NE(derive_seed(42, {1, 2}), derive_seed(42, {2, 1}));
  EXPECT_EQ(derive_seed(42, {1, 2}), derive_seed(42, {1, 2}));
  EXPECT_NE(replication_seed(42, {0.5, 2, 200}, 0), replication_seed(42, {0.5, 2, 200}, 1));
}

TEST(Sample, DeterministicForSeed) {
  const PopulationSpec pop = build_population(2, 0.60);
  EXPECT_EQ(generate_sample(pop, 50, 7), generate_sample(pop, 50, 7));
  EXPECT_NE(generate_sample(pop, 50, 7), generate_sample(pop, 50, 8));
}

TEST(Sample, LargeSampleMoments) {
  const PopulationSpec pop = build_population(2, 0.70);
  const Matrix x = generate_sample(pop, 100000, 31);
  const SymMatrix cov = sample_moment_matrix(x, MomentMode::covariance);
  for (Index i = 0; i < 20; ++i) EXPECT_NEAR(cov(i, i), 1.0, 0.02);
  const SymMatrix cor = sample_moment_matrix(x, MomentMode::correlation);
  EXPECT_NEAR(cor(0, 1), 0.21, 0.01);
  EXPECT_NEAR(cor(0, 10), 0.0, 0.01);
}

TEST(Congruence, Basics) {
  Vector v(4);
  v << 0.7, 0.3, -0.2, 0.1;
  EXPECT_NEAR(tucker_congruence(v, v), 1.0, 1e-15);
  EXPECT_NEAR(tucker_congruence(v, -v), -1.0, 1e-15);
  Vector a = Vector::Zero(6), b = Vector::Zero(6);
  a.head(3) << 0.70, 0.30, 0.30;
  b.head(4) << 0.65, 0.35, 0.25, 0.05;
  // .635 / sqrt(.67 * .61)
  EXPECT_NEAR(tucker_congruence(a, b), 0.635 / std::sqrt(0.67 * 0.61), 1e-14);
  bool degenerate = false;
  EXPECT_EQ(tucker_congruence(a, Vector::Zero(6), &degenerate), 0.0);
  EXPECT_TRUE(degenerate);
}

TEST(Alignment, SwappedAndNegated) {
  const PopulationSpec pop = build_population(2, 0.70);
  Matrix sample(20, 2);
  sample.col(0) = pop.loadings.values.col(1);
  sample.col(1) = -pop.loadings.values.col(0);
  const Alignment al = align_to_population(sample, pop.loadings.values);
  EXPECT_EQ(al.sample_column, (std::vector<Index>{1, 0}));
  EXPECT_EQ(al.signs(0), -1.0);
  EXPECT_EQ(al.signs(1), 1.0);
  EXPECT_NEAR(al.congruence(0), 1.0, 1e-15);
  EXPECT_NEAR(al.congruence(1), 1.0, 1e-15);
  EXPECT_EQ(apply_alignment(sample, al), pop.loadings.values);
}

TEST(Alignment, SelfIsIdentity) {
  std::mt19937_64 rng(1);
  const Matrix m = random_matrix(20, 2, rng);
  const Alignment al = align_to_population(m, m);
  EXPECT_EQ(al.sample_column, (std::vector<Index>{0, 1}));
  EXPECT_NEAR(al.congruence.minCoeff(), 1.0, 1e-14);
}

TEST(Alignment, BeatsGreedyAndMatchesBruteForce) {
  // Both sample columns are closest to population factor 0; greedy would give
  // it column 0 and leave factor 1 with a poor match.
  Matrix pop(3, 2), sample(3, 2);
  pop << 1, 0, 0, 1, 0, 0;
  sample << 0.9, 0.8, 0.1, 0.6, 0.0, 0.0;
  const Alignment al = align_to_population(sample, pop);
  EXPECT_NEAR(al.congruence.sum(), brute_force_best(sample, pop), 1e-12);
  EXPECT_EQ(al.sample_column, (std::vector<Index>{0, 1}));

  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Index q = 2 + t % 5;
    const Matrix p = random_matrix(3 * q, q, rng);
    const Matrix s = random_matrix(3 * q, q, rng);
    const Alignment a = align_to_population(s, p);
    EXPECT_NEAR(a.congruence.sum(), brute_force_best(s, p), 1e-12);
    std::vector<Index> cols = a.sample_column;
    std::sort(cols.begin(), cols.end());
    for (Index j = 0; j < q; ++j) EXPECT_EQ(cols[j], j);
  }
}

TEST(SingleItemHit, PopulationPatternHits) {
  const PopulationSpec pop = build_population(2, 0.70);
  for (double d : {0.05, 0.10}) {
    const std::vector<bool> hit = single_item_hit(pop.loadings.values, pop, d);
    EXPECT_TRUE(hit[0] && hit[1]);
  }
}

TEST(SingleItemHit, ColumnMarginTooSmall) {
  const PopulationSpec pop = build_population(2, 0.40);
  Matrix l = pop.loadings.values;
  l(1, 0) = 0.36;
  const std::vector<bool> hit = single_item_hit(l, pop, 0.05);
  EXPECT_FALSE(hit[0]);
  EXPECT_TRUE(hit[1]);
}

TEST(SingleItemHit, RowViolationOnly) {
  const PopulationSpec pop = build_population(2, 0.70);
  Matrix l = pop.loadings.values;
  l(0, 1) = 0.68;
  // Column margin for factor 1 is still .70 - .30 = .40.
  EXPECT_GE(l(0, 0) - l.col(0).tail(19).cwiseAbs().maxCoeff(), 0.40 - 1e-15);
  const std::vector<bool> hit = single_item_hit(l, pop, 0.05);
  EXPECT_FALSE(hit[0]);
  // Also spoils factor 2's column margin: .70 - .68 = .02.
  EXPECT_FALSE(hit[1]);
}

TEST(SingleItemHit, ExactDecimalMargin) {
  const PopulationSpec pop = build_population(1, 0.70);
  Matrix l = pop.loadings.values;
  l(1, 0) = 0.65;
  EXPECT_TRUE(single_item_hit(l, pop, 0.05)[0]);
}

TEST(Grid, RepeatRunsAreIdentical) {
  GridConfig cfg = small_grid();
  cfg.replications = 1;
  const auto a = run_grid(cfg);
  const auto b = run_grid(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].mean_congruence, b[i].mean_congruence);
    EXPECT_EQ(a[i].hit_rates, b[i].hit_rates);
    EXPECT_EQ(a[i].failures, b[i].failures);
  }
}

TEST(Grid, ThreadCountDoesNotChangeResults) {
  GridConfig cfg = small_grid();
  cfg.replications = 6;
  const auto one = run_grid(cfg);
  cfg.threads = 3;
  const auto three = run_grid(cfg);
  std::ostringstream a, b;
  write_results_csv(a, one);
  write_results_csv(b, three);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Grid, HitRatesOrderedAndBounded) {
  GridConfig cfg = small_grid();
  cfg.replications = 10;
  for (const ConditionResult& r : run_grid(cfg)) {
    EXPECT_LE(r.hit_rate(0.10), r.hit_rate(0.05));
    EXPECT_GE(r.hit_rate(0.10), 0.0);
    EXPECT_LE(r.hit_rate(0.05), 100.0);
    EXPECT_GT(r.mean_congruence, 0.0);
    EXPECT_LE(r.mean_congruence, 1.0);
    EXPECT_EQ(r.hit_trials, 20);
  }
}

TEST(Grid, TargetRotationIsTheBenchmark) {
  GridConfig cfg = small_grid();
  cfg.conditions = {{0.60, 2, 200}};
  cfg.replications = 30;
  cfg.rotations = {Criterion::varimax, Criterion::parsimax, Criterion::target};
  const auto res = run_grid(cfg);
  for (ExtractionMethod m : cfg.methods) {
    double target = 0.0, target_se = 0.0;
    for (const auto& r : res)
      if (r.method == m && r.rotation == Criterion::target) {
        target = r.mean_congruence;
        target_se = r.congruence_se;
      }
    for (const auto& r : res)
      if (r.method == m && r.rotation != Criterion::target) EXPECT_GE(target + target_se, r.mean_congruence);
  }
}

TEST(Grid, RejectsBadConfig) {
  GridConfig cfg = small_grid();
  cfg.rotations.clear();
  EXPECT_THROW(run_grid(cfg), InputError);
  cfg = small_grid();
  cfg.conditions = {{0.5, 0, 100}};
  EXPECT_THROW(run_grid(cfg), InputError);
  cfg = small_grid();
  cfg.replications = 0;
  EXPECT_THROW(run_grid(cfg), InputError);
}

TEST(Grid, ProgressReportedPerCondition) {
  GridConfig cfg = small_grid();
  cfg.conditions = {{0.7, 2, 100}, {0.8, 2, 100}};
  cfg.replications = 1;
  std::vector<std::size_t> seen;
  cfg.progress = [&](const Condition&, std::size_t i, std::size_t total) {
    seen.push_back(i);
    EXPECT_EQ(total, 2u);
  };
  run_grid(cfg);
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1}));
}

TEST(Report, EmptyResultsCreateNoFile) {
  const auto path = std::filesystem::temp_directory_path() / "spfa_empty_report.csv";
  std::filesystem::remove(path);
  EXPECT_THROW(emit_report({}, ReportFormat::csv, path.string()), InputError);
  EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(Report, FullGridHasSeventyTwoRows) {
  GridConfig cfg;
  cfg.replications = 1;
  const auto res = run_grid(cfg);
  std::ostringstream out;
  write_results_csv(out, res);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 73);
  EXPECT_EQ(text.substr(0, text.find('\n')), kResultsHeader);
}
