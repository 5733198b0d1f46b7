#pragma once

// Monte Carlo study of single-salient-loading populations: every factor owns
// a block of ten variables with one salient loading, two loadings of .30 and
// seven zeros. Samples are fitted with Minres and SPFA, rotated, aligned to
// the population and scored by Tucker congruence and the single-item hit
// rule.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spfa/extraction.hpp"
#include "spfa/rotation.hpp"

namespace spfa {

struct PopulationSpec {
  Index q = 0;
  double sl = 0.0;
  LoadingMatrix loadings;             // 10q x q
  std::vector<Index> salient_index;   // row of the salient loading, per factor
  bool salient_dominant = true;       // false when sl <= .30
};

PopulationSpec build_population(Index q, double sl);

// Unique-factor weights sqrt(1 - row sums of squared loadings).
Vector population_unique_weights(const PopulationSpec& spec);

// Population correlation matrix LL' + Psi^2.
SymMatrix population_moment(const PopulationSpec& spec);

// n x p sample x = L f + Psi u, with f then u drawn row by row from one
// Box-Muller stream seeded by `seed`.
Matrix generate_sample(const PopulationSpec& spec, Index n, std::uint64_t seed);

// Cosine between two loading columns. Returns 0 and sets *degenerate when
// either column is all zeros.
double tucker_congruence(const Vector& a, const Vector& b, bool* degenerate = nullptr);

struct Alignment {
  // sample_column[j] is the sample column matched to population factor j.
  std::vector<Index> sample_column;
  Vector signs;       // +1 / -1 per population factor
  Vector congruence;  // >= 0 after sign correction
};

// One-to-one matching of sample columns to population columns maximizing the
// summed absolute congruence. Exact (dynamic programming over subsets).
Alignment align_to_population(const Matrix& sample_pattern, const Matrix& population);

// Sample pattern reordered and sign-corrected into population column order.
Matrix apply_alignment(const Matrix& sample_pattern, const Alignment& alignment);

// Per factor: the salient variable beats every other loading in its column
// and every other loading in its row by at least delta (absolute values).
std::vector<bool> single_item_hit(const Matrix& aligned_pattern, const PopulationSpec& spec, double delta);

struct Condition {
  double sl = 0.0;
  Index q = 0;
  Index n = 0;
};

// The 4 x 3 x 3 study design.
std::vector<Condition> default_conditions();

struct GridConfig {
  std::vector<Condition> conditions = default_conditions();
  int replications = 200;
  std::vector<ExtractionMethod> methods{ExtractionMethod::minres, ExtractionMethod::spfa};
  std::vector<Criterion> rotations{Criterion::varimax};
  RotationMode mode = RotationMode::orthogonal;
  std::vector<double> deltas{0.05, 0.10};
  std::uint64_t seed = 42;
  int threads = 0;  // 0: hardware concurrency
  FitOptions fit_options;
  RotationOptions rotation_options;
  // Called after each condition completes, in condition order.
  std::function<void(const Condition&, std::size_t index, std::size_t total)> progress;
};

struct ConditionResult {
  Condition condition;
  ExtractionMethod method = ExtractionMethod::minres;
  Criterion rotation = Criterion::varimax;
  int replications = 0;
  double mean_congruence = 0.0;
  // Standard error of the mean over replication-level mean congruences.
  double congruence_se = 0.0;
  std::vector<double> deltas;
  std::vector<double> hit_rates;  // percent, aligned with deltas
  long long hit_trials = 0;       // factor instances: q * replications
  int failures = 0;

  // Percent hit rate at `delta`, or NaN when delta was not evaluated.
  double hit_rate(double delta) const;
};

// Deterministic seed for one replication of one condition. Every method and
// rotation within the replication analyses the same sample.
std::uint64_t replication_seed(std::uint64_t base, const Condition& c, int replication);

std::vector<ConditionResult> run_grid(const GridConfig& config);

// Stable order by (sl, q, n, method, rotation).
void sort_results(std::vector<ConditionResult>& results);

}  // namespace spfa
