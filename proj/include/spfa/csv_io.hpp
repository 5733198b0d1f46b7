#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spfa/loading_matrix.hpp"
#include "spfa/matrix_kernel.hpp"

namespace spfa {

// Header row of column names followed by a numeric body.
struct DataTable {
  std::vector<std::string> columns;
  Matrix values;
};

// Comma-separated, '.' decimal. Errors name the offending row and column.
DataTable read_data_csv(std::istream& in);
DataTable read_data_csv_file(const std::string& path);

// Fixed 6-significant-digit rendering used by every CSV the tool writes.
std::string format_number(double x);

// First column holds variable names, then one column per factor.
void write_loadings_csv(std::ostream& out, const LoadingMatrix& l);
LoadingMatrix read_loadings_csv_file(const std::string& path);

void write_matrix_csv(std::ostream& out, const std::vector<std::string>& columns, const Matrix& m);

std::vector<std::string> split_csv_line(const std::string& line);
std::string trim(const std::string& s);

}  // namespace spfa
