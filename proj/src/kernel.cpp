#include "okcusum/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "okcusum/simd.hpp"

namespace okcusum {

double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  spec.validate();
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("eval_kernel: dimension mismatch");
  const double sq = simd::squared_distance(x.data(), y.data(), x.size());
  return std::exp(-sq / (spec.bandwidth * spec.bandwidth));
}

double median_heuristic(const Points& samples) {
  const std::int64_t n = samples.size();
  if (n < 2) throw std::invalid_argument("median_heuristic: need at least 2 samples");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto ri = samples.row(i);
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double sq = simd::squared_distance(ri.data(), samples.row(j).data(), ri.size());
      if (sq > 0.0) dists.push_back(std::sqrt(sq));
    }
  }
  if (dists.empty())
    throw std::invalid_argument("median_heuristic: degenerate data, all pairwise distances are zero");
  // Lower median keeps the result an observed distance.
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>((dists.size() - 1) / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  return *mid;
}

Mat gram(const KernelSpec& spec, const Points& block_a, const Points& block_b) {
  spec.validate();
  if (block_a.dim != block_b.dim) throw std::invalid_argument("gram: dimension mismatch");
  const auto na = block_a.size(), nb = block_b.size();
  Mat m(static_cast<int>(na), static_cast<int>(nb));
  const double inv_r2 = 1.0 / (spec.bandwidth * spec.bandwidth);
  for (std::int64_t i = 0; i < na; ++i) {
    const auto ri = block_a.row(i);
    double* out = m.row_ptr(static_cast<int>(i));
    for (std::int64_t j = 0; j < nb; ++j) {
      const double sq = simd::squared_distance(ri.data(), block_b.row(j).data(), ri.size());
      out[j] = std::exp(-sq * inv_r2);
    }
  }
  return m;
}

void gram_column(const KernelSpec& spec, const Points& rows, std::span<const double> y, double* out) {
  if (static_cast<int>(y.size()) != rows.dim)
    throw std::invalid_argument("gram_column: dimension mismatch");
  const double inv_r2 = 1.0 / (spec.bandwidth * spec.bandwidth);
  const auto n = rows.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double sq = simd::squared_distance(rows.row(i).data(), y.data(), y.size());
    out[i] = std::exp(-sq * inv_r2);
  }
}

}  // namespace okcusum
