#include "okcusum/csv.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

namespace okcusum {

namespace {

bool split_numeric(const std::string& line, std::vector<double>& out, std::string* bad_token) {
  out.clear();
  std::string token;
  const char* p = line.c_str();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && (*p == ' ' || *p == '\t' || *p == ',' || *p == '\r')) ++p;
    if (p >= end) break;
    const char* start = p;
    while (p < end && *p != ' ' && *p != '\t' && *p != ',' && *p != '\r') ++p;
    token.assign(start, p);
    char* parse_end = nullptr;
    const double v = std::strtod(token.c_str(), &parse_end);
    if (parse_end != token.c_str() + token.size()) {
      if (bad_token) *bad_token = token;
      return false;
    }
    out.push_back(v);
  }
  return true;
}

}  // namespace

bool parse_csv_row(const std::string& line, std::vector<double>& row, const std::string& name,
                   std::int64_t lineno) {
  std::string bad;
  if (!split_numeric(line, row, &bad))
    throw std::runtime_error(name + ":" + std::to_string(lineno) + ": not a number: '" + bad + "'");
  return !row.empty();
}

Points read_points_csv(std::istream& in, const std::string& name) {
  Points pts;
  std::string line;
  std::int64_t lineno = 0;
  std::vector<double> row;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++lineno;
    std::string bad;
    if (!split_numeric(line, row, &bad)) {
      if (first_content) {  // header row
        first_content = false;
        continue;
      }
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": not a number: '" + bad + "'");
    }
    if (row.empty()) continue;
    first_content = false;
    if (pts.dim != 0 && static_cast<int>(row.size()) != pts.dim)
      throw std::runtime_error(name + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(pts.dim) + " columns, got " + std::to_string(row.size()));
    pts.push_row(row);
  }
  if (pts.size() == 0) throw std::runtime_error(name + ": no data rows");
  return pts;
}

Points read_points_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_points_csv(in, path);
}

void write_points_csv(std::ostream& out, const Points& pts) {
  char buf[40];
  for (std::int64_t i = 0; i < pts.size(); ++i) {
    const auto r = pts.row(i);
    for (int j = 0; j < pts.dim; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r[static_cast<std::size_t>(j)]);
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace okcusum
