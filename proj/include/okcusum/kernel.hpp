#pragma once

#include <span>

#include "okcusum/types.hpp"

namespace okcusum {

/// Kernel family, bandwidth and uniform bound K; the only place raw vectors
/// meet the kernel.
struct KernelSpec {
  enum class Family { gaussian_rbf };
  Family family = Family::gaussian_rbf;
  double bandwidth = 1.0;  // r, same units as the input coordinates
  double bound = 1.0;      // K = sup k; 1 for gaussian_rbf

  void validate() const {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("KernelSpec: bandwidth must be positive");
    if (!(bound > 0.0)) throw std::invalid_argument("KernelSpec: bound must be positive");
  }
};

inline KernelSpec gaussian_rbf(double bandwidth) { return KernelSpec{KernelSpec::Family::gaussian_rbf, bandwidth, 1.0}; }

/// exp(-||x-y||^2 / r^2), in (0, 1].
double eval_kernel(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// Median of the pairwise Euclidean distances over distinct index pairs,
/// zero distances excluded; lower median for even counts.
double median_heuristic(const Points& samples);

/// M[i][j] = k(a_i, b_j).
Mat gram(const KernelSpec& spec, const Points& block_a, const Points& block_b);

/// out[i] = k(rows_i, y) for every row; the detector's hot update path.
void gram_column(const KernelSpec& spec, const Points& rows, std::span<const double> y, double* out);

}  // namespace okcusum
