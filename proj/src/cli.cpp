#include "spfa/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spfa/csv_io.hpp"
#include "spfa/error.hpp"
#include "spfa/extraction.hpp"
#include "spfa/report.hpp"
#include "spfa/rotation.hpp"
#include "spfa/scores.hpp"
#include "spfa/simulation.hpp"

namespace spfa {

namespace {

using ordered_json = nlohmann::ordered_json;

struct CommonFit {
  std::string input;
  Index q = 0;
  std::string method = "both";
  std::string rotation = "varimax";
  std::string mode = "orthogonal";
  std::string target;
  std::string moment = "correlation";
  std::string output = "spfa";
  std::optional<std::uint64_t> seed;
  int starts = 10;
  bool kaiser = false;
  double tolerance = 1e-9;
  int max_iter = 2000;
};

void add_fit_options(CLI::App* cmd, CommonFit& o) {
  cmd->add_option("--input,-i", o.input, "Data CSV: header row, numeric body")->required();
  cmd->add_option("--q", o.q, "Number of factors")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--method", o.method, "cfm, spfa or both")
      ->check(CLI::IsMember({"cfm", "minres", "spfa", "both"}));
  cmd->add_option("--rotation", o.rotation, "varimax, parsimax, infomax, target or none")
      ->check(CLI::IsMember({"varimax", "parsimax", "infomax", "target", "none"}));
  cmd->add_option("--mode", o.mode, "orthogonal or oblique")->check(CLI::IsMember({"orthogonal", "oblique"}));
  cmd->add_option("--target", o.target, "Loadings CSV used as target for --rotation target");
  cmd->add_option("--moment", o.moment, "correlation or covariance")
      ->check(CLI::IsMember({"correlation", "covariance"}));
  cmd->add_option("--output,-o", o.output, "Output path prefix");
  cmd->add_option("--seed", o.seed, "Seed for random rotation starts (env SPFA_SEED)");
  cmd->add_option("--starts", o.starts, "Random rotation starts besides the identity")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--kaiser", o.kaiser, "Kaiser-normalize rows before rotating");
  cmd->add_option("--tolerance", o.tolerance, "Objective change tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iter", o.max_iter, "Iteration limit for extraction")->check(CLI::PositiveNumber);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SPFA_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v = 0;
    std::istringstream in(env);
    if (!(in >> v) || !in.eof()) throw InputError(std::string("SPFA_SEED is not an integer: '") + env + "'");
    return v;
  }
  return fallback;
}

std::vector<ExtractionMethod> methods_from(const std::string& m) {
  if (m == "both") return {ExtractionMethod::minres, ExtractionMethod::spfa};
  if (m == "spfa") return {ExtractionMethod::spfa};
  return {ExtractionMethod::minres};
}

ordered_json matrix_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct FittedModel {
  FactorSolution solution;
  RotationSolution rotation;
};

struct PreparedData {
  DataTable table;
  SymMatrix s;
  MomentMode mode;
};

PreparedData prepare(const CommonFit& o) {
  PreparedData d{read_data_csv_file(o.input), {}, MomentMode::correlation};
  const Index n = d.table.values.rows();
  const Index p = d.table.values.cols();
  if (n <= p) {
    throw InputError("need more observations than variables: n=" + std::to_string(n) + ", p=" + std::to_string(p));
  }
  if (o.q >= p) throw InputError("--q must be less than the number of variables (" + std::to_string(p) + ")");
  d.mode = o.moment == "covariance" ? MomentMode::covariance : MomentMode::correlation;
  d.s = sample_moment_matrix(d.table.values, d.mode, d.table.columns);
  return d;
}

FittedModel fit_and_rotate(const PreparedData& d, const CommonFit& o, ExtractionMethod method) {
  FitOptions fo;
  fo.objective_tolerance = o.tolerance;
  fo.max_iterations = o.max_iter;
  FittedModel m;
  if (method == ExtractionMethod::minres) {
    m.solution = minres_fit(d.s, o.q, fo);
  } else {
    SpfaOptions so;
    static_cast<FitOptions&>(so) = fo;
    m.solution = spfa_fit(d.s, o.q, so);
  }
  m.solution.loadings.variables = d.table.columns;

  const RotationMode mode = parse_rotation_mode(o.mode);
  if (o.rotation == "none") {
    m.rotation = identity_rotation(m.solution.loadings, Criterion::varimax, mode);
  } else {
    RotationOptions ro;
    ro.random_starts = o.starts;
    ro.kaiser_normalize = o.kaiser;
    ro.seed = resolve_seed(o.seed, ro.seed);
    const Criterion c = parse_criterion(o.rotation);
    Matrix target;
    if (c == Criterion::target) {
      if (o.target.empty()) throw InputError("--rotation target requires --target");
      target = read_loadings_csv_file(o.target).values;
    }
    m.rotation = rotate(m.solution.loadings, c, mode, ro, target);
  }
  return m;
}

ordered_json solution_json(const FittedModel& m, const PreparedData& d, const CommonFit& o) {
  const FactorSolution& s = m.solution;
  ordered_json j;
  j["method"] = to_string(s.method);
  j["q"] = o.q;
  j["p"] = d.table.values.cols();
  j["n"] = d.table.values.rows();
  j["moment"] = o.moment;
  j["objective"] = s.objective;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["condition_number"] = s.condition_number;
  ordered_json uniq;
  for (Index i = 0; i < s.uniqueness.size(); ++i) uniq[s.loadings.variables[i]] = s.uniqueness(i);
  j["uniqueness"] = uniq;
  ordered_json hey = ordered_json::array();
  for (Index i : s.heywood_variables) hey.push_back(s.loadings.variables[i]);
  j["heywood_variables"] = hey;
  ordered_json rot;
  rot["criterion"] = o.rotation;
  rot["mode"] = to_string(m.rotation.mode);
  rot["criterion_value"] = m.rotation.criterion_value;
  rot["converged"] = m.rotation.converged;
  rot["iterations"] = m.rotation.iterations;
  rot["random_start_index"] = m.rotation.random_start_index;
  rot["transform"] = matrix_json(m.rotation.transform);
  rot["phi"] = matrix_json(m.rotation.phi);
  j["rotation"] = rot;
  return j;
}

int cmd_fit(const CommonFit& o, std::ostream& out) {
  const PreparedData d = prepare(o);
  bool all_converged = true;
  for (ExtractionMethod method : methods_from(o.method)) {
    const FittedModel m = fit_and_rotate(d, o, method);
    const std::string base = o.output + "_" + to_string(method);
    std::ostringstream unrot, rot;
    write_loadings_csv(unrot, m.solution.loadings);
    write_loadings_csv(rot, m.rotation.pattern);
    write_text(base + "_unrotated.csv", unrot.str());
    write_text(base + "_rotated.csv", rot.str());
    write_text(base + ".json", solution_json(m, d, o).dump(2));
    out << to_string(method) << ": objective " << format_number(m.solution.objective) << ", "
        << m.solution.iterations << " iterations" << (m.solution.converged ? "" : " (NOT converged)") << '\n';
    all_converged = all_converged && m.solution.converged && m.rotation.converged;
  }
  return all_converged ? kExitOk : kExitNumerical;
}

struct RotateOpts {
  std::string input;
  std::string rotation = "varimax";
  std::string mode = "orthogonal";
  std::string target;
  std::string output = "spfa";
  std::optional<std::uint64_t> seed;
  int starts = 10;
  bool kaiser = false;
};

int cmd_rotate(const RotateOpts& o, std::ostream& out) {
  const LoadingMatrix l = read_loadings_csv_file(o.input);
  RotationOptions ro;
  ro.random_starts = o.starts;
  ro.kaiser_normalize = o.kaiser;
  ro.seed = resolve_seed(o.seed, ro.seed);
  const Criterion c = parse_criterion(o.rotation);
  Matrix target;
  if (c == Criterion::target) {
    if (o.target.empty()) throw InputError("--rotation target requires --target");
    target = read_loadings_csv_file(o.target).values;
  }
  const RotationSolution r = rotate(l, c, parse_rotation_mode(o.mode), ro, target);
  std::ostringstream csv;
  write_loadings_csv(csv, r.pattern);
  write_text(o.output + "_rotated.csv", csv.str());
  ordered_json j;
  j["criterion"] = to_string(r.criterion);
  j["mode"] = to_string(r.mode);
  j["criterion_value"] = r.criterion_value;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["random_start_index"] = r.random_start_index;
  j["transform"] = matrix_json(r.transform);
  j["phi"] = matrix_json(r.phi);
  write_text(o.output + "_rotation.json", j.dump(2));
  out << to_string(r.criterion) << " (" << to_string(r.mode) << "): criterion " << format_number(r.criterion_value)
      << (r.converged ? "" : " (NOT converged)") << '\n';
  return r.converged ? kExitOk : kExitNumerical;
}

struct ScoresOpts {
  CommonFit fit;
  std::vector<std::string> families{"best_linear"};
};

int cmd_scores(const ScoresOpts& o, std::ostream& out) {
  std::vector<PredictorFamily> families;
  for (const auto& f : o.families) families.push_back(parse_predictor_family(f));
  if (parse_rotation_mode(o.fit.mode) == RotationMode::oblique) {
    for (PredictorFamily f : families) {
      if (f == PredictorFamily::takeuchi) {
        throw ModeError(
            "takeuchi/anderson_rubin needs --mode orthogonal: an orthogonal factor score predictor only makes "
            "sense for orthogonal factors");
      }
    }
  }
  const PreparedData d = prepare(o.fit);
  const Centering centering = Centering::from_data(d.table.values, d.mode);

  std::vector<std::string> columns;
  std::vector<Matrix> blocks;
  ordered_json report = ordered_json::array();
  bool all_converged = true;
  for (ExtractionMethod method : methods_from(o.fit.method)) {
    const FittedModel m = fit_and_rotate(d, o.fit, method);
    all_converged = all_converged && m.solution.converged;
    for (PredictorFamily fam : families) {
      const ScorePredictor pred = predictor_weights(m.solution, m.rotation, fam, d.s);
      const ValidityReport v = validity_report(pred, m.solution, m.rotation, d.s);
      blocks.push_back(score_rows(pred, d.table.values, centering));
      for (const auto& f : m.rotation.pattern.factors) columns.push_back(to_string(method) + "_" + to_string(fam) + "_" + f);
      ordered_json j;
      j["method"] = to_string(method);
      j["family"] = to_string(fam);
      j["rotation"] = o.fit.rotation;
      j["mode"] = to_string(m.rotation.mode);
      j["determinacy"] = vector_json(v.determinacy);
      j["cross_correlations"] = matrix_json(v.cross_correlations);
      j["predictor_intercorrelations"] = matrix_json(v.predictor_intercorrelations);
      j["phi"] = matrix_json(v.phi);
      j["structural_residual"] = v.structural_residual;
      j["weights"] = matrix_json(pred.weights);
      report.push_back(std::move(j));
      out << to_string(method) << ' ' << to_string(fam) << " determinacy:";
      for (Index k = 0; k < v.determinacy.size(); ++k) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3f", v.determinacy(k));
        out << buf;
      }
      out << '\n';
    }
  }
  Matrix all(d.table.values.rows(), static_cast<Index>(columns.size()));
  Index col = 0;
  for (const Matrix& b : blocks) {
    all.middleCols(col, b.cols()) = b;
    col += b.cols();
  }
  std::ostringstream csv;
  write_matrix_csv(csv, columns, all);
  write_text(o.fit.output + "_scores.csv", csv.str());
  write_text(o.fit.output + "_validity.json", report.dump(2));
  return all_converged ? kExitOk : kExitNumerical;
}

struct SimulateOpts {
  std::string config;
  std::vector<double> sl;
  std::vector<long long> q;
  std::vector<long long> n;
  std::optional<int> reps;
  std::vector<std::string> methods;
  std::vector<std::string> rotations;
  std::vector<double> deltas;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string mode = "orthogonal";
  std::string output = "results.csv";
  std::string json;
  std::string figure;
  bool full_study = false;
};

int cmd_simulate(const SimulateOpts& o, std::ostream& out, std::ostream& err) {
  GridConfig cfg;
  bool seed_from_config = false;
  if (!o.config.empty()) {
    std::set<std::string> keys;
    cfg = parse_simulation_config_file(o.config, &keys);
    seed_from_config = keys.count("seed") > 0;
  }
  if (o.full_study) cfg.replications = 1000;
  if (o.reps) cfg.replications = *o.reps;
  if (!o.sl.empty() || !o.q.empty() || !o.n.empty()) {
    std::vector<double> sls;
    std::vector<long long> qs, ns;
    for (const Condition& c : cfg.conditions) {
      if (std::find(sls.begin(), sls.end(), c.sl) == sls.end()) sls.push_back(c.sl);
      if (std::find(qs.begin(), qs.end(), c.q) == qs.end()) qs.push_back(c.q);
      if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
    }
    if (!o.sl.empty()) sls = o.sl;
    if (!o.q.empty()) qs = o.q;
    if (!o.n.empty()) ns = o.n;
    for (double v : sls)
      if (!(v > 0 && v < 1)) throw InputError("--sl: salient loading must lie in (0, 1)");
    for (long long v : qs)
      if (v < 1) throw InputError("--q: q must be at least 1");
    for (long long v : ns)
      if (v < 2) throw InputError("--n: n must be at least 2");
    cfg.conditions.clear();
    for (double sl : sls)
      for (long long q : qs)
        for (long long n : ns) cfg.conditions.push_back({sl, static_cast<Index>(q), static_cast<Index>(n)});
  }
  if (!o.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : o.methods) {
      if (m == "cfm" || m == "minres") {
        cfg.methods.push_back(ExtractionMethod::minres);
      } else if (m == "spfa") {
        cfg.methods.push_back(ExtractionMethod::spfa);
      } else {
        throw InputError("--methods: unknown method '" + m + "'");
      }
    }
  }
  if (!o.rotations.empty()) {
    cfg.rotations.clear();
    for (const auto& r : o.rotations) cfg.rotations.push_back(parse_criterion(r));
  }
  if (!o.deltas.empty()) cfg.deltas = o.deltas;
  if (o.threads) cfg.threads = *o.threads;
  if (o.seed || !seed_from_config) cfg.seed = resolve_seed(o.seed, cfg.seed);
  cfg.mode = parse_rotation_mode(o.mode);
  cfg.progress = [&err](const Condition& c, std::size_t i, std::size_t total) {
    err << "[" << (i + 1) << "/" << total << "] sl=" << format_number(c.sl) << " q=" << c.q << " n=" << c.n
        << " done\n";
  };

  const auto results = run_grid(cfg);
  emit_report(results, ReportFormat::csv, o.output);
  if (!o.json.empty()) emit_report(results, ReportFormat::json, o.json);
  if (!o.figure.empty()) {
    std::ostringstream fig;
    write_congruence_long_csv(fig, results);
    write_text(o.figure, fig.str());
  }
  int failures = 0;
  for (const auto& r : results) failures += r.failures;
  out << "wrote " << results.size() << " result rows to " << o.output;
  if (failures > 0) out << " (" << failures << " non-converged fits included)";
  out << '\n';
  return kExitOk;
}

struct ReportOpts {
  std::string input;
  std::string compare;
  std::string output;
};

int cmd_report(const ReportOpts& o, std::ostream& out) {
  if (o.compare != "table2") throw InputError("--compare supports only 'table2'");
  const auto rows = read_results_csv_file(o.input);
  std::ostringstream buf;
  const std::size_t n = write_reference_comparison(buf, rows);
  if (o.output.empty()) {
    out << buf.str();
  } else {
    write_text(o.output, buf.str());
    out << "wrote " << n << " comparison rows to " << o.output << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Score predictor factor analysis and common factor analysis"};
  app.name("spfa");
  app.require_subcommand(1);

  CommonFit fit_opts;
  auto* fit = app.add_subcommand("fit", "Extract, rotate and write loadings");
  add_fit_options(fit, fit_opts);

  RotateOpts rot_opts;
  auto* rot = app.add_subcommand("rotate", "Rotate a loadings CSV");
  rot->add_option("--input,-i", rot_opts.input, "Loadings CSV")->required();
  rot->add_option("--rotation", rot_opts.rotation, "varimax, parsimax, infomax or target")
      ->check(CLI::IsMember({"varimax", "parsimax", "infomax", "target"}));
  rot->add_option("--mode", rot_opts.mode, "orthogonal or oblique")->check(CLI::IsMember({"orthogonal", "oblique"}));
  rot->add_option("--target", rot_opts.target, "Target loadings CSV");
  rot->add_option("--output,-o", rot_opts.output, "Output path prefix");
  rot->add_option("--seed", rot_opts.seed, "Seed for random starts (env SPFA_SEED)");
  rot->add_option("--starts", rot_opts.starts, "Random starts besides the identity")->check(CLI::NonNegativeNumber);
  rot->add_flag("--kaiser", rot_opts.kaiser, "Kaiser-normalize rows before rotating");

  ScoresOpts sc_opts;
  auto* sc = app.add_subcommand("scores", "Fit, then compute factor scores and validity diagnostics");
  add_fit_options(sc, sc_opts.fit);
  sc->add_option("--family", sc_opts.families,
                 "best_linear, takeuchi (anderson_rubin), krijnen, bartlett, harman; repeat or comma-separate")
      ->delimiter(',');

  SimulateOpts sim_opts;
  auto* sim = app.add_subcommand("simulate", "Run the Monte Carlo grid");
  sim->add_option("--config", sim_opts.config, "Key-value config file");
  sim->add_option("--sl", sim_opts.sl, "Salient loadings")->delimiter(',');
  sim->add_option("--q", sim_opts.q, "Factor counts")->delimiter(',');
  sim->add_option("--n", sim_opts.n, "Sample sizes")->delimiter(',');
  sim->add_option("--reps,--replications", sim_opts.reps, "Replications per condition")->check(CLI::PositiveNumber);
  sim->add_option("--methods", sim_opts.methods, "cfm, spfa")->delimiter(',');
  sim->add_option("--rotations", sim_opts.rotations, "varimax, parsimax, infomax, target")->delimiter(',');
  sim->add_option("--deltas", sim_opts.deltas, "Hit margins")->delimiter(',');
  sim->add_option("--seed", sim_opts.seed, "Base seed (env SPFA_SEED)");
  sim->add_option("--threads", sim_opts.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sim->add_option("--mode", sim_opts.mode, "orthogonal or oblique")->check(CLI::IsMember({"orthogonal", "oblique"}));
  sim->add_option("--output,-o", sim_opts.output, "Results CSV path");
  sim->add_option("--json", sim_opts.json, "Also write the JSON mirror here");
  sim->add_option("--figure-csv", sim_opts.figure, "Long-format mean congruence CSV for plotting");
  sim->add_flag("--full-study", sim_opts.full_study, "1000 replications per condition");

  ReportOpts rep_opts;
  auto* rep = app.add_subcommand("report", "Compare simulation results with reference values");
  rep->add_option("--input,-i", rep_opts.input, "Results CSV")->required();
  rep->add_option("--compare", rep_opts.compare, "Reference table (table2)")->required();
  rep->add_option("--output,-o", rep_opts.output, "Write comparison CSV here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (*fit) return cmd_fit(fit_opts, out);
    if (*rot) return cmd_rotate(rot_opts, out);
    if (*sc) return cmd_scores(sc_opts, out);
    if (*sim) return cmd_simulate(sim_opts, out, err);
    if (*rep) return cmd_report(rep_opts, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitInput;
}

}  // namespace spfa
