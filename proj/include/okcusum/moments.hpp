#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "okcusum/kernel.hpp"

namespace okcusum {

/// Pre-computed H0 moment constants that normalize every detection statistic.
///
/// c1 = E[h^2(X,X',Y,Y')] and c2 = Cov[h(X,X',Y,Y'), h(X'',X''',Y,Y')] with
/// all arguments i.i.d. pre-change. third_terms holds the six third-order
/// expectations, in order:
///   [0] E[h(X1,X2,Y1,Y2) h(X2,X3,Y2,Y3) h(X3,X1,Y3,Y1)]
///   [1] E[h(X1,X2,Y1,Y2) h(X2,X3,Y2,Y3) h(X4,X5,Y3,Y1)]
///   [2] E[h(X1,X2,Y1,Y2) h(X3,X4,Y2,Y3) h(X5,X6,Y3,Y1)]
///   [3] E[h^3]
///   [4] E[h^2 h']   (h' shares the Y pair, fresh X pair)
///   [5] E[h h' h''] (three fresh X pairs, shared Y pair)
struct MomentEstimates {
  double c1 = 0.0;
  double c2 = 0.0;
  std::array<double, 6> third_terms{};
  int n_blocks = 0;  // N
  double rho = 0.0;  // (c1/(2N) + (N-1) c2/(2N))^(-1/2)
  std::int64_t n_samples_used = 0;
  std::uint64_t seed = 0;
};

/// Monte Carlo estimation over tuples of distinct reference indices. Each
/// draw consumes up to 9 distinct samples; randomness for draw i is derived
/// from (seed, i), so results do not depend on the thread count.
MomentEstimates estimate_moments(const Points& reference, const KernelSpec& spec, int n_blocks,
                                 std::int64_t n_draws = 100000, std::uint64_t seed = 0);

/// Var_H0 of the averaged block statistic at block size B:
/// (B choose 2)^(-1) (c1/N + (N-1) c2/N).
double var_h0(const MomentEstimates& m, int b);

/// Cov_H0 between block sizes B1 at time t and B2 at time t+s:
/// c2 * (l choose 2) / ((B1 choose 2)(B2 choose 2)) with overlap
/// l = 0 if B2 < s, B2-s if B2-s < B1, else B1. Exposed for testing.
double cov_h0(const MomentEstimates& m, int b1, int b2, int s);

/// E_H0 of the cubed averaged block statistic at block size B (raw moment).
double third_raw_h0(const MomentEstimates& m, int b);

/// Standardized H0 skewness E[Z_B^3] = third_raw_h0 * var_h0^(-3/2).
double third_moment_h0(const MomentEstimates& m, int b);

std::string moments_to_json(const MomentEstimates& m);
MomentEstimates moments_from_json(const std::string& text);

}  // namespace okcusum
