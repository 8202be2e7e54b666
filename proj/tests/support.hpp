#pragma once

#include <cmath>

#include "okcusum/distributions.hpp"
#include "okcusum/rng.hpp"
#include "okcusum/types.hpp"

namespace okcusum::test {

inline Points random_points(int dim, std::int64_t n, std::uint64_t seed, double spread = 1.0) {
  Points p(dim, n);
  Rng rng(seed);
  for (auto& v : p.data) v = spread * rng.normal();
  return p;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace okcusum::test
