#include "okcusum/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace okcusum::simd {

namespace scalar {

double sum(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace scalar

namespace {

struct Backend {
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  const char* name;
};

Backend pick_backend() {
  const char* want = std::getenv("KCPD_SIMD");
  const bool force_scalar = want && std::strcmp(want, "scalar") == 0;
#if defined(__x86_64__) || defined(_M_X64)
  if (!force_scalar && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return {avx2::sum, avx2::dot, avx2::squared_distance, "avx2"};
#endif
#if defined(__ARM_NEON) || defined(__aarch64__)
  if (!force_scalar) return {neon::sum, neon::dot, neon::squared_distance, "neon"};
#endif
  return {scalar::sum, scalar::dot, scalar::squared_distance, "scalar"};
}

const Backend& active() {
  static const Backend b = pick_backend();
  return b;
}

}  // namespace

double sum(const double* a, std::size_t n) { return active().sum(a, n); }
double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}
const char* backend() { return active().name; }

}  // namespace okcusum::simd
