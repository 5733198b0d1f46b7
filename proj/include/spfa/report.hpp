#pragma once

// Serialization of simulation results, the published hit-rate reference
// table, and the flat key-value simulation config format.

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spfa/simulation.hpp"

namespace spfa {

enum class ReportFormat { csv, json };

inline constexpr const char* kResultsHeader =
    "sl,q,n,method,rotation,replications,mean_congruence,hit05,hit10,failures";

// One row per result in (sl, q, n, method, rotation) order.
void write_results_csv(std::ostream& out, std::vector<ConditionResult> results);
void write_results_json(std::ostream& out, std::vector<ConditionResult> results);

// Long-format mean congruence table for plotting:
// sl,q,n,method,rotation,mean_congruence,congruence_se.
void write_congruence_long_csv(std::ostream& out, std::vector<ConditionResult> results);

// Validates inputs before touching the filesystem, then writes `out_path`.
void emit_report(const std::vector<ConditionResult>& results, ReportFormat format, const std::string& out_path);

// Flat record of one results CSV row.
struct ResultRow {
  double sl = 0;
  int q = 0;
  int n = 0;
  std::string method;
  std::string rotation;
  int replications = 0;
  double mean_congruence = 0;
  double hit05 = 0;
  double hit10 = 0;
  int failures = 0;
};

std::vector<ResultRow> read_results_csv(std::istream& in);
std::vector<ResultRow> read_results_csv_file(const std::string& path);

// Published Varimax hit percentages per (sl, q, n).
struct ReferenceHitRow {
  double sl;
  int q;
  int n;
  double cfm05;
  double spfa05;
  double cfm10;
  double spfa10;
};

const std::vector<ReferenceHitRow>& reference_hit_rates();
std::optional<ReferenceHitRow> reference_hit_lookup(double sl, int q, int n);

// Side-by-side of simulated Varimax hit rates with the reference:
// sl,q,n,measure,simulated,reference,abs_diff. Returns the number of rows.
std::size_t write_reference_comparison(std::ostream& out, const std::vector<ResultRow>& rows);

// Parses `key = value` lines (# comments). Unknown keys and malformed values
// throw InputError naming the key.
// `keys`, when given, receives the keys present in the file.
GridConfig parse_simulation_config(std::istream& in, std::set<std::string>* keys = nullptr);
GridConfig parse_simulation_config_file(const std::string& path, std::set<std::string>* keys = nullptr);

}  // namespace spfa
