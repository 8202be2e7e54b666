#pragma once

#include "okcusum/kernel.hpp"

namespace okcusum {

/// h(x1,x2,y1,y2) = k(x1,x2) + k(y1,y2) - k(x1,y2) - k(x2,y1); in [-2K, 2K].
double h_statistic(const KernelSpec& spec, std::span<const double> x1, std::span<const double> x2,
                   std::span<const double> y1, std::span<const double> y2);

/// Unbiased MMD^2 estimate between equal-size blocks:
/// (1/(B(B-1))) sum_{i != j} h(X_i, X_j, Y_i, Y_j). Both cross terms
/// k(x_i,y_j) and k(x_j,y_i) enter with coefficient -1; diagonal cross terms
/// are excluded. May be negative.
double mmd_unbiased(const KernelSpec& spec, const Points& x, const Points& y);

/// Same estimator at large n, used as the plug-in for the population value.
double mmd_population_estimate(const Points& sample_p, const Points& sample_q, const KernelSpec& spec);

}  // namespace okcusum
