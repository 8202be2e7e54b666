#pragma once

#include <cstddef>

namespace okcusum::simd {

/// Scalar reference kernels. These define the semantics; vector variants must
/// agree with them up to reassociation rounding.
namespace scalar {
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace avx2
#endif

#if defined(__ARM_NEON) || defined(__aarch64__)
namespace neon {
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace neon
#endif

/// Dispatched entry points. The backend is chosen once at startup: cpuid
/// probe, overridable with KCPD_SIMD=scalar|avx2|neon.
double sum(const double* a, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);

const char* backend();

}  // namespace okcusum::simd
