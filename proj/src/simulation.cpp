#include "spfa/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <iostream>
#include <optional>
#include <limits>
#include <thread>
#include <tuple>

#include "spfa/error.hpp"
#include "spfa/random.hpp"

namespace spfa {

namespace {

constexpr Index kBlock = 10;
constexpr double kMinorLoading = 0.30;

struct CellTally {
  double congruence_sum = 0.0;  // over factors
  std::vector<long long> hits;  // per delta
  bool failed = false;
};

// Results for one (condition, replication): [method][rotation].
using UnitResult = std::vector<std::vector<CellTally>>;

UnitResult run_replication(const GridConfig& cfg, const PopulationSpec& pop, const Condition& c, int rep) {
  const std::uint64_t seed = replication_seed(cfg.seed, c, rep);
  const Matrix data = generate_sample(pop, c.n, seed);
  const SymMatrix s = sample_moment_matrix(data, MomentMode::correlation);

  UnitResult out(cfg.methods.size(), std::vector<CellTally>(cfg.rotations.size()));
  std::optional<FactorSolution> minres;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    std::optional<FactorSolution> sol;
    try {
      if (!minres) minres = minres_fit(s, c.q, cfg.fit_options);
      if (cfg.methods[mi] == ExtractionMethod::minres) {
        sol = *minres;
      } else {
        SpfaOptions so;
        static_cast<FitOptions&>(so) = cfg.fit_options;
        so.start = SpfaStart::given;
        so.start_loadings = minres->loadings.values;
        try {
          sol = spfa_fit(s, c.q, so);
        } catch (const RankDeficiencyError&) {
          so.start = SpfaStart::principal_axes;
          sol = spfa_fit(s, c.q, so);
        }
      }
    } catch (const Error&) {
      sol.reset();
    }
    for (std::size_t ri = 0; ri < cfg.rotations.size(); ++ri) {
      CellTally& cell = out[mi][ri];
      cell.hits.assign(cfg.deltas.size(), 0);
      if (!sol) {
        cell.failed = true;
        continue;
      }
      cell.failed = !sol->converged;
      RotationOptions ro = cfg.rotation_options;
      ro.seed = derive_seed(seed, {0x726f74ULL, ri, mi});
      try {
        const RotationSolution rot =
            rotate(sol->loadings, cfg.rotations[ri], cfg.mode, ro, pop.loadings.values);
        const Alignment al = align_to_population(rot.pattern.values, pop.loadings.values);
        const Matrix aligned = apply_alignment(rot.pattern.values, al);
        cell.congruence_sum = al.congruence.sum();
        for (std::size_t d = 0; d < cfg.deltas.size(); ++d) {
          const std::vector<bool> hit = single_item_hit(aligned, pop, cfg.deltas[d]);
          cell.hits[d] = std::count(hit.begin(), hit.end(), true);
        }
      } catch (const Error&) {
        cell.failed = true;
      }
    }
  }
  return out;
}

}  // namespace

PopulationSpec build_population(Index q, double sl) {
  if (q < 1) throw InputError("population needs at least one factor (q >= 1)");
  if (!(sl > 0.0 && sl < 1.0)) throw InputError("salient loading must lie in (0, 1)");
  PopulationSpec spec;
  spec.q = q;
  spec.sl = sl;
  spec.salient_dominant = sl > kMinorLoading;
  if (!spec.salient_dominant) {
    std::cerr << "warning: salient loading " << sl << " does not exceed the minor loading .30\n";
  }
  Matrix l = Matrix::Zero(kBlock * q, q);
  for (Index j = 0; j < q; ++j) {
    const Index first = kBlock * j;
    l(first, j) = sl;
    l(first + 1, j) = kMinorLoading;
    l(first + 2, j) = kMinorLoading;
    spec.salient_index.push_back(first);
  }
  spec.loadings = LoadingMatrix(std::move(l));
  return spec;
}

Vector population_unique_weights(const PopulationSpec& spec) {
  return (1.0 - spec.loadings.values.rowwise().squaredNorm().array()).sqrt().matrix();
}

SymMatrix population_moment(const PopulationSpec& spec) {
  const Matrix& l = spec.loadings.values;
  Matrix sigma = l * l.transpose();
  sigma.diagonal().setOnes();
  return SymMatrix(sigma);
}

Matrix generate_sample(const PopulationSpec& spec, Index n, std::uint64_t seed) {
  if (n < 2) throw InputError("sample size must be at least 2");
  const Matrix& l = spec.loadings.values;
  const Index p = l.rows();
  const Index q = l.cols();
  const Vector psi = population_unique_weights(spec);
  NormalGenerator gen(seed);
  Matrix f(n, q);
  Matrix u(n, p);
  for (Index r = 0; r < n; ++r) {
    for (Index j = 0; j < q; ++j) f(r, j) = gen.next();
    for (Index i = 0; i < p; ++i) u(r, i) = gen.next();
  }
  return f * l.transpose() + u * psi.asDiagonal();
}

double tucker_congruence(const Vector& a, const Vector& b, bool* degenerate) {
  if (a.size() != b.size()) throw InputError("congruence needs equal-length columns");
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  const bool deg = !(na > 0.0) || !(nb > 0.0);
  if (degenerate != nullptr) *degenerate = deg;
  if (deg) return 0.0;
  return std::clamp(a.dot(b) / std::sqrt(na * nb), -1.0, 1.0);
}

Alignment align_to_population(const Matrix& sample_pattern, const Matrix& population) {
  if (sample_pattern.rows() != population.rows() || sample_pattern.cols() != population.cols()) {
    throw InputError("sample and population patterns differ in shape");
  }
  const Index q = population.cols();
  if (q > 20) throw InputError("alignment supports at most 20 factors");
  Matrix cong(q, q);  // (population j, sample k)
  for (Index j = 0; j < q; ++j)
    for (Index k = 0; k < q; ++k) cong(j, k) = tucker_congruence(population.col(j), sample_pattern.col(k));

  // best[mask]: max summed |congruence| assigning population factors
  // 0..popcount(mask)-1 to the sample columns in mask.
  const std::size_t states = std::size_t{1} << q;
  std::vector<double> best(states, -std::numeric_limits<double>::infinity());
  std::vector<int> choice(states, -1);
  best[0] = 0.0;
  for (std::size_t mask = 0; mask < states; ++mask) {
    if (!std::isfinite(best[mask])) continue;
    const Index j = std::popcount(mask);
    if (j >= q) continue;
    for (Index k = 0; k < q; ++k) {
      const std::size_t bit = std::size_t{1} << k;
      if (mask & bit) continue;
      const double v = best[mask] + std::abs(cong(j, k));
      if (v > best[mask | bit] + 1e-15) {
        best[mask | bit] = v;
        choice[mask | bit] = static_cast<int>(k);
      }
    }
  }
  Alignment al;
  al.sample_column.assign(static_cast<std::size_t>(q), 0);
  al.signs = Vector::Ones(q);
  al.congruence = Vector::Zero(q);
  std::size_t mask = states - 1;
  for (Index j = q - 1; j >= 0; --j) {
    const int k = choice[mask];
    al.sample_column[j] = k;
    const double c = cong(j, k);
    al.signs(j) = c < 0 ? -1.0 : 1.0;
    al.congruence(j) = std::abs(c);
    mask &= ~(std::size_t{1} << k);
  }
  return al;
}

Matrix apply_alignment(const Matrix& sample_pattern, const Alignment& alignment) {
  Matrix out(sample_pattern.rows(), sample_pattern.cols());
  for (Index j = 0; j < out.cols(); ++j) {
    out.col(j) = alignment.signs(j) * sample_pattern.col(alignment.sample_column[j]);
  }
  return out;
}

std::vector<bool> single_item_hit(const Matrix& aligned, const PopulationSpec& spec, double delta) {
  const Index q = spec.q;
  if (aligned.rows() != spec.loadings.rows() || aligned.cols() != q) {
    throw InputError("aligned pattern does not match the population shape");
  }
  std::vector<bool> hit(static_cast<std::size_t>(q), false);
  const Matrix abs = aligned.cwiseAbs();
  for (Index j = 0; j < q; ++j) {
    const Index star = spec.salient_index[j];
    const double own = abs(star, j);
    double column_rival = 0.0;
    for (Index i = 0; i < abs.rows(); ++i)
      if (i != star) column_rival = std::max(column_rival, abs(i, j));
    double row_rival = 0.0;
    for (Index k = 0; k < q; ++k)
      if (k != j) row_rival = std::max(row_rival, abs(star, k));
    // Allowance for decimal margins such as .70 - .65 landing just below .05.
    const double tol = 1e-12;
    hit[j] = own - column_rival >= delta - tol && (q == 1 || own - row_rival >= delta - tol);
  }
  return hit;
}

std::vector<Condition> default_conditions() {
  std::vector<Condition> out;
  for (double sl : {0.50, 0.60, 0.70, 0.80})
    for (Index q : {2, 5, 8})
      for (Index n : {200, 400, 1000}) out.push_back({sl, q, n});
  return out;
}

double ConditionResult::hit_rate(double delta) const {
  for (std::size_t i = 0; i < deltas.size(); ++i)
    if (std::abs(deltas[i] - delta) < 1e-12) return hit_rates[i];
  return std::numeric_limits<double>::quiet_NaN();
}

std::uint64_t replication_seed(std::uint64_t base, const Condition& c, int replication) {
  const auto sl_key = static_cast<std::uint64_t>(std::llround(c.sl * 1e6));
  return derive_seed(base, {sl_key, static_cast<std::uint64_t>(c.q), static_cast<std::uint64_t>(c.n),
                            static_cast<std::uint64_t>(replication)});
}

std::vector<ConditionResult> run_grid(const GridConfig& cfg) {
  if (cfg.replications < 1) throw InputError("replications must be at least 1");
  if (cfg.methods.empty()) throw InputError("at least one extraction method is required");
  if (cfg.rotations.empty()) throw InputError("at least one rotation is required");
  if (cfg.conditions.empty()) throw InputError("at least one condition is required");
  for (const Condition& c : cfg.conditions) {
    if (c.q < 1) throw InputError("q_list: q must be at least 1");
    if (c.n < 10 * c.q + 1) throw InputError("n_list: n must exceed the number of variables 10*q");
    if (!(c.sl > 0 && c.sl < 1)) throw InputError("sl_list: salient loading must lie in (0, 1)");
  }

  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.replications)));

  std::vector<ConditionResult> results;
  for (std::size_t ci = 0; ci < cfg.conditions.size(); ++ci) {
    const Condition& c = cfg.conditions[ci];
    const PopulationSpec pop = build_population(c.q, c.sl);
    std::vector<UnitResult> units(static_cast<std::size_t>(cfg.replications));
    std::atomic<int> next{0};
    auto worker = [&] {
      for (int r = next++; r < cfg.replications; r = next++) units[r] = run_replication(cfg, pop, c, r);
    };
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      for (std::size_t ri = 0; ri < cfg.rotations.size(); ++ri) {
        ConditionResult res;
        res.condition = c;
        res.method = cfg.methods[mi];
        res.rotation = cfg.rotations[ri];
        res.replications = cfg.replications;
        res.deltas = cfg.deltas;
        res.hit_trials = static_cast<long long>(c.q) * cfg.replications;
        std::vector<long long> hits(cfg.deltas.size(), 0);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (const UnitResult& u : units) {
          const CellTally& cell = u[mi][ri];
          const double m = cell.congruence_sum / static_cast<double>(c.q);
          sum += m;
          sum_sq += m * m;
          for (std::size_t d = 0; d < hits.size(); ++d) hits[d] += cell.hits[d];
          if (cell.failed) ++res.failures;
        }
        const double reps = cfg.replications;
        res.mean_congruence = sum / reps;
        if (cfg.replications > 1) {
          const double var = std::max(0.0, (sum_sq - reps * res.mean_congruence * res.mean_congruence) / (reps - 1));
          res.congruence_se = std::sqrt(var / reps);
        }
        for (long long h : hits) res.hit_rates.push_back(100.0 * static_cast<double>(h) / res.hit_trials);
        results.push_back(std::move(res));
      }
    }
    if (cfg.progress) cfg.progress(c, ci, cfg.conditions.size());
  }
  sort_results(results);
  return results;
}

void sort_results(std::vector<ConditionResult>& results) {
  std::stable_sort(results.begin(), results.end(), [](const ConditionResult& a, const ConditionResult& b) {
    return std::tuple(a.condition.sl, a.condition.q, a.condition.n, static_cast<int>(a.method),
                      static_cast<int>(a.rotation)) < std::tuple(b.condition.sl, b.condition.q, b.condition.n,
                                                                 static_cast<int>(b.method),
                                                                 static_cast<int>(b.rotation));
  });
}

}  // namespace spfa
