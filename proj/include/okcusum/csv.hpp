#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "okcusum/types.hpp"

namespace okcusum {

/// One observation per row, numeric columns = dimensions, comma or whitespace
/// separated. A non-numeric first row is treated as a header. Parse errors
/// carry line numbers.
Points read_points_csv(std::istream& in, const std::string& name = "<stream>");
Points read_points_csv_file(const std::string& path);

/// Parses one data line into `row`; returns false for blank lines. Used by
/// streaming detection on stdin.
bool parse_csv_row(const std::string& line, std::vector<double>& row, const std::string& name,
                   std::int64_t lineno);

void write_points_csv(std::ostream& out, const Points& pts);

}  // namespace okcusum
