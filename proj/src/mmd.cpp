#include "okcusum/mmd.hpp"

#include <cmath>

#include "okcusum/simd.hpp"

namespace okcusum {

double h_statistic(const KernelSpec& spec, std::span<const double> x1, std::span<const double> x2,
                   std::span<const double> y1, std::span<const double> y2) {
  return eval_kernel(spec, x1, x2) + eval_kernel(spec, y1, y2) - eval_kernel(spec, x1, y2) -
         eval_kernel(spec, x2, y1);
}

double mmd_unbiased(const KernelSpec& spec, const Points& x, const Points& y) {
  spec.validate();
  if (x.dim != y.dim) throw std::invalid_argument("mmd_unbiased: dimension mismatch");
  const std::int64_t b = x.size();
  if (b != y.size()) throw std::invalid_argument("mmd_unbiased: block size mismatch");
  if (b < 2) throw std::invalid_argument("mmd_unbiased: block size must be >= 2");

  const double inv_r2 = 1.0 / (spec.bandwidth * spec.bandwidth);
  auto k = [&](std::span<const double> a, std::span<const double> c) {
    return std::exp(-simd::squared_distance(a.data(), c.data(), a.size()) * inv_r2);
  };

  double sxx = 0.0, syy = 0.0, sxy_off = 0.0;
  for (std::int64_t i = 0; i < b; ++i) {
    for (std::int64_t j = i + 1; j < b; ++j) {
      sxx += k(x.row(i), x.row(j));
      syy += k(y.row(i), y.row(j));
      sxy_off += k(x.row(i), y.row(j)) + k(x.row(j), y.row(i));
    }
  }
  return 2.0 * (sxx + syy - sxy_off) / (static_cast<double>(b) * static_cast<double>(b - 1));
}

double mmd_population_estimate(const Points& sample_p, const Points& sample_q, const KernelSpec& spec) {
  return mmd_unbiased(spec, sample_p, sample_q);
}

}  // namespace okcusum
