#include "spfa/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "spfa/error.hpp"

namespace spfa {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

namespace {

bool parse_double(const std::string& text, double& v) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  return ec == std::errc() && ptr == last && std::isfinite(v);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

DataTable read_data_csv(std::istream& in) {
  DataTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.columns = split_csv_line(line);
  const std::size_t p = t.columns.size();
  for (std::size_t j = 0; j < p; ++j) {
    if (t.columns[j].empty()) throw InputError("CSV header: column " + std::to_string(j + 1) + " has no name");
  }
  std::vector<double> body;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != p) {
      throw InputError("CSV row " + std::to_string(line_no) + ": expected " + std::to_string(p) + " fields, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0;
      if (!parse_double(cells[j], v)) {
        throw InputError("CSV row " + std::to_string(line_no) + ", column '" + t.columns[j] +
                         "': not a finite number: '" + cells[j] + "'");
      }
      body.push_back(v);
    }
    ++rows;
  }
  t.values.resize(static_cast<Index>(rows), static_cast<Index>(p));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < p; ++j) t.values(r, j) = body[r * p + j];
  return t;
}

DataTable read_data_csv_file(const std::string& path) {
  auto in = open_input(path);
  return read_data_csv(in);
}

std::string format_number(double x) {
  if (x == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void write_loadings_csv(std::ostream& out, const LoadingMatrix& l) {
  out << "variable";
  for (const auto& f : l.factors) out << ',' << f;
  out << '\n';
  for (Index i = 0; i < l.rows(); ++i) {
    out << l.variables[i];
    for (Index j = 0; j < l.cols(); ++j) out << ',' << format_number(l(i, j));
    out << '\n';
  }
}

LoadingMatrix read_loadings_csv_file(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("loadings file '" + path + "' is empty");
  auto header = split_csv_line(line);
  if (header.size() < 2) throw InputError("loadings file needs a name column and at least one factor column");
  std::vector<std::string> factors(header.begin() + 1, header.end());
  std::vector<std::string> names;
  std::vector<double> body;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw InputError("loadings row " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(cells.size()));
    }
    names.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0;
      if (!parse_double(cells[j], v)) {
        throw InputError("loadings row " + std::to_string(line_no) + ", column '" + header[j] +
                         "': not a finite number: '" + cells[j] + "'");
      }
      body.push_back(v);
    }
  }
  const Index p = static_cast<Index>(names.size());
  const Index q = static_cast<Index>(factors.size());
  Matrix m(p, q);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < q; ++j) m(i, j) = body[static_cast<std::size_t>(i * q + j)];
  return LoadingMatrix(std::move(m), std::move(names), std::move(factors));
}

void write_matrix_csv(std::ostream& out, const std::vector<std::string>& columns, const Matrix& m) {
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_number(m(i, j));
    out << '\n';
  }
}

}  // namespace spfa
