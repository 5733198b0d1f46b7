#include "spfa/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "spfa/csv_io.hpp"
#include "spfa/error.hpp"

namespace spfa {

namespace {

std::string hit_field(const ConditionResult& r, double delta) {
  const double v = r.hit_rate(delta);
  return std::isnan(v) ? "NA" : format_number(v);
}

// The JSON mirror carries the same rounded values as the CSV.
nlohmann::json rounded(double x) {
  if (std::isnan(x)) return nullptr;
  return std::stod(format_number(x));
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  for (auto& item : split_csv_line(value)) {
    if (item.empty()) throw InputError("config key '" + key + "': empty list element");
    out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InputError("config key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) throw InputError("config key '" + key + "': '" + text + "' is not an integer");
  return v;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

void write_results_csv(std::ostream& out, std::vector<ConditionResult> results) {
  sort_results(results);
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    out << format_number(r.condition.sl) << ',' << r.condition.q << ',' << r.condition.n << ','
        << to_string(r.method) << ',' << to_string(r.rotation) << ',' << r.replications << ','
        << format_number(r.mean_congruence) << ',' << hit_field(r, 0.05) << ',' << hit_field(r, 0.10) << ','
        << r.failures << '\n';
  }
}

void write_results_json(std::ostream& out, std::vector<ConditionResult> results) {
  sort_results(results);
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json row;
    row["sl"] = rounded(r.condition.sl);
    row["q"] = r.condition.q;
    row["n"] = r.condition.n;
    row["method"] = to_string(r.method);
    row["rotation"] = to_string(r.rotation);
    row["replications"] = r.replications;
    row["mean_congruence"] = rounded(r.mean_congruence);
    row["hit05"] = rounded(r.hit_rate(0.05));
    row["hit10"] = rounded(r.hit_rate(0.10));
    row["failures"] = r.failures;
    arr.push_back(std::move(row));
  }
  out << arr.dump(2) << '\n';
}

void write_congruence_long_csv(std::ostream& out, std::vector<ConditionResult> results) {
  sort_results(results);
  out << "sl,q,n,method,rotation,mean_congruence,congruence_se\n";
  for (const auto& r : results) {
    out << format_number(r.condition.sl) << ',' << r.condition.q << ',' << r.condition.n << ','
        << to_string(r.method) << ',' << to_string(r.rotation) << ',' << format_number(r.mean_congruence) << ','
        << format_number(r.congruence_se) << '\n';
  }
}

void emit_report(const std::vector<ConditionResult>& results, ReportFormat format, const std::string& out_path) {
  if (results.empty()) throw InputError("no results to report");
  std::ostringstream buf;
  if (format == ReportFormat::csv) {
    write_results_csv(buf, results);
  } else {
    write_results_json(buf, results);
  }
  auto out = open_output(out_path);
  out << buf.str();
  if (!out) throw IoError("failed writing '" + out_path + "'");
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kResultsHeader) {
    throw InputError(std::string("results CSV must start with header ") + kResultsHeader);
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 10) throw InputError("results row " + std::to_string(line_no) + ": expected 10 fields");
    const std::string where = "results row " + std::to_string(line_no);
    ResultRow r;
    r.sl = to_double(where + " sl", c[0]);
    r.q = static_cast<int>(to_integer(where + " q", c[1]));
    r.n = static_cast<int>(to_integer(where + " n", c[2]));
    r.method = c[3];
    r.rotation = c[4];
    r.replications = static_cast<int>(to_integer(where + " replications", c[5]));
    r.mean_congruence = to_double(where + " mean_congruence", c[6]);
    r.hit05 = c[7] == "NA" ? std::nan("") : to_double(where + " hit05", c[7]);
    r.hit10 = c[8] == "NA" ? std::nan("") : to_double(where + " hit10", c[8]);
    r.failures = static_cast<int>(to_integer(where + " failures", c[9]));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_results_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read_results_csv(in);
}

const std::vector<ReferenceHitRow>& reference_hit_rates() {
  static const std::vector<ReferenceHitRow> rows = {
      {.50, 2, 200, 22.80, 28.25, 17.65, 28.25},  {.50, 2, 400, 38.15, 45.50, 29.80, 45.50},
      {.50, 2, 1000, 66.15, 76.20, 53.10, 76.20}, {.50, 5, 200, 13.26, 18.78, 9.44, 18.10},
      {.50, 5, 400, 22.48, 31.86, 15.94, 31.82},  {.50, 5, 1000, 44.10, 59.84, 30.38, 59.84},
      {.50, 8, 200, 12.04, 14.20, 8.34, 12.50},   {.50, 8, 400, 18.13, 23.99, 12.43, 23.31},
      {.50, 8, 1000, 34.38, 52.34, 20.61, 52.34}, {.60, 2, 200, 28.85, 36.45, 23.60, 36.45},
      {.60, 2, 400, 52.80, 61.75, 44.15, 61.75},  {.60, 2, 1000, 88.05, 93.50, 77.95, 93.50},
      {.60, 5, 200, 17.96, 24.08, 12.60, 23.28},  {.60, 5, 400, 31.02, 43.20, 22.64, 43.16},
      {.60, 5, 1000, 67.02, 79.28, 52.02, 79.28}, {.60, 8, 200, 15.35, 18.30, 10.95, 16.31},
      {.60, 8, 400, 24.25, 32.71, 16.40, 31.96},  {.60, 8, 1000, 51.39, 69.86, 34.43, 69.86},
      {.70, 2, 200, 38.50, 46.85, 31.95, 46.85},  {.70, 2, 400, 69.00, 75.15, 60.55, 75.15},
      {.70, 2, 1000, 97.40, 98.80, 93.75, 98.80}, {.70, 5, 200, 22.76, 30.32, 16.68, 29.44},
      {.70, 5, 400, 42.60, 55.28, 31.62, 55.26},  {.70, 5, 1000, 87.62, 93.32, 76.28, 93.32},
      {.70, 8, 200, 19.96, 23.10, 14.36, 20.51},  {.70, 8, 400, 32.56, 43.60, 21.81, 42.70},
      {.70, 8, 1000, 71.81, 86.31, 55.03, 86.31}, {.80, 2, 200, 50.95, 59.00, 42.55, 59.00},
      {.80, 2, 400, 82.70, 87.20, 76.50, 87.20},  {.80, 2, 1000, 99.85, 100.00, 98.70, 100.00},
      {.80, 5, 200, 30.14, 38.78, 22.04, 37.90},  {.80, 5, 400, 55.86, 69.26, 43.64, 69.26},
      {.80, 5, 1000, 96.88, 98.68, 92.10, 98.68}, {.80, 8, 200, 24.96, 29.11, 17.93, 25.61},
      {.80, 8, 400, 42.88, 55.33, 29.59, 54.75},  {.80, 8, 1000, 88.85, 96.14, 77.34, 96.14},
  };
  return rows;
}

std::optional<ReferenceHitRow> reference_hit_lookup(double sl, int q, int n) {
  for (const auto& r : reference_hit_rates())
    if (std::abs(r.sl - sl) < 1e-9 && r.q == q && r.n == n) return r;
  return std::nullopt;
}

std::size_t write_reference_comparison(std::ostream& out, const std::vector<ResultRow>& rows) {
  // (sl, q, n) -> method -> row, Varimax only.
  std::map<std::tuple<long long, int, int>, std::map<std::string, const ResultRow*>> cells;
  for (const auto& r : rows) {
    if (r.rotation != "varimax") continue;
    cells[{std::llround(r.sl * 1e6), r.q, r.n}][r.method] = &r;
  }
  out << "sl,q,n,measure,simulated,reference,abs_diff\n";
  std::size_t written = 0;
  for (const auto& [key, methods] : cells) {
    const double sl = std::get<0>(key) / 1e6;
    const auto ref = reference_hit_lookup(sl, std::get<1>(key), std::get<2>(key));
    if (!ref) continue;
    const struct {
      const char* measure;
      const char* method;
      double delta;
      double reference;
    } measures[] = {{"cfm05", "cfm", 0.05, ref->cfm05},
                    {"spfa05", "spfa", 0.05, ref->spfa05},
                    {"cfm10", "cfm", 0.10, ref->cfm10},
                    {"spfa10", "spfa", 0.10, ref->spfa10}};
    for (const auto& m : measures) {
      auto it = methods.find(m.method);
      if (it == methods.end()) continue;
      const double sim = m.delta < 0.075 ? it->second->hit05 : it->second->hit10;
      out << format_number(sl) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << m.measure << ','
          << format_number(sim) << ',' << format_number(m.reference) << ','
          << format_number(std::abs(sim - m.reference)) << '\n';
      ++written;
    }
  }
  return written;
}

GridConfig parse_simulation_config(std::istream& in, std::set<std::string>* keys) {
  GridConfig cfg;
  std::vector<double> sl_list{0.50, 0.60, 0.70, 0.80};
  std::vector<long long> q_list{2, 5, 8};
  std::vector<long long> n_list{200, 400, 1000};
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw InputError("config key '" + key + "' given twice");
    if (value.empty()) throw InputError("config key '" + key + "' has no value");

    if (key == "sl_list") {
      sl_list.clear();
      for (auto& v : split_list(key, value)) sl_list.push_back(to_double(key, v));
    } else if (key == "q_list") {
      q_list.clear();
      for (auto& v : split_list(key, value)) q_list.push_back(to_integer(key, v));
    } else if (key == "n_list") {
      n_list.clear();
      for (auto& v : split_list(key, value)) n_list.push_back(to_integer(key, v));
    } else if (key == "replications") {
      cfg.replications = static_cast<int>(to_integer(key, value));
    } else if (key == "methods") {
      cfg.methods.clear();
      for (auto& v : split_list(key, value)) {
        if (v == "cfm" || v == "minres") {
          cfg.methods.push_back(ExtractionMethod::minres);
        } else if (v == "spfa") {
          cfg.methods.push_back(ExtractionMethod::spfa);
        } else {
          throw InputError("config key 'methods': unknown method '" + v + "'");
        }
      }
    } else if (key == "rotations") {
      cfg.rotations.clear();
      for (auto& v : split_list(key, value)) {
        try {
          cfg.rotations.push_back(parse_criterion(v));
        } catch (const InputError& e) {
          throw InputError("config key 'rotations': " + std::string(e.what()));
        }
      }
    } else if (key == "delta_list") {
      cfg.deltas.clear();
      for (auto& v : split_list(key, value)) cfg.deltas.push_back(to_double(key, v));
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_integer(key, value));
    } else if (key == "threads") {
      cfg.threads = static_cast<int>(to_integer(key, value));
    } else {
      throw InputError("unknown config key '" + key + "'");
    }
  }

  for (double sl : sl_list)
    if (!(sl > 0 && sl < 1)) throw InputError("config key 'sl_list': values must lie in (0, 1)");
  for (long long q : q_list)
    if (q < 1) throw InputError("config key 'q_list': q must be at least 1");
  for (long long n : n_list)
    if (n < 2) throw InputError("config key 'n_list': n must be at least 2");
  for (double d : cfg.deltas)
    if (!(d >= 0 && d < 1)) throw InputError("config key 'delta_list': deltas must lie in [0, 1)");
  if (cfg.replications < 1) throw InputError("config key 'replications' must be at least 1");
  if (cfg.threads < 0) throw InputError("config key 'threads' must be non-negative");
  if (cfg.methods.empty()) throw InputError("config key 'methods' is empty");
  if (cfg.rotations.empty()) throw InputError("config key 'rotations' is empty");

  cfg.conditions.clear();
  for (double sl : sl_list)
    for (long long q : q_list)
      for (long long n : n_list) cfg.conditions.push_back({sl, static_cast<Index>(q), static_cast<Index>(n)});
  if (keys != nullptr) *keys = std::move(seen);
  return cfg;
}

GridConfig parse_simulation_config_file(const std::string& path, std::set<std::string>* keys) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_simulation_config(in, keys);
}

}  // namespace spfa
