#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace okcusum {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Fixed-dimension observations stored row-major.
struct Points {
  int dim = 0;
  std::vector<double> data;

  Points() = default;
  Points(int d, std::int64_t n) : dim(d), data(static_cast<std::size_t>(d) * static_cast<std::size_t>(n)) {
    if (d <= 0) throw std::invalid_argument("Points: dimension must be positive");
  }

  std::int64_t size() const { return dim > 0 ? static_cast<std::int64_t>(data.size()) / dim : 0; }

  std::span<const double> row(std::int64_t i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<double> row(std::int64_t i) {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }

  void push_row(std::span<const double> r) {
    if (dim == 0) dim = static_cast<int>(r.size());
    if (static_cast<int>(r.size()) != dim) throw std::invalid_argument("Points: row dimension mismatch");
    data.insert(data.end(), r.begin(), r.end());
  }

  void set_row(std::int64_t i, std::span<const double> r) {
    if (static_cast<int>(r.size()) != dim) throw std::invalid_argument("Points: row dimension mismatch");
    std::copy(r.begin(), r.end(), data.begin() + static_cast<std::size_t>(i) * dim);
  }
};

/// Dense row-major matrix, just enough for Gram bookkeeping.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
  double* row_ptr(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row_ptr(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
};

}  // namespace okcusum
