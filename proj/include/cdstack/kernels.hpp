#pragma once

#include <cstddef>
#include <string>

namespace cdstack::kernels {

// Double-precision inner-loop primitives. Every primitive has a scalar
// reference implementation (namespace ref) and, on x86 with AVX2, a
// vectorized variant. The active backend is chosen once at startup from
// the CPU features, overridable via the CDSTACK_SIMD environment variable
// ("scalar", "avx2", "auto") or select_backend(). The two backends are
// equivalence-tested against each other.

enum class Backend { Scalar, Avx2 };

Backend active_backend();
void select_backend(Backend b);   // throws std::runtime_error if unsupported
bool avx2_supported();
std::string backend_name(Backend b);

double dot(const double* a, const double* b, std::size_t n);
// sum_i w[i]*a[i]*b[i]
double dot3(const double* w, const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// out = a*x + b
void scale_shift(const double* x, double a, double b, double* out, std::size_t n);

namespace ref {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* w, const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale_shift(const double* x, double a, double b, double* out, std::size_t n);
}  // namespace ref

#ifdef CDSTACK_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* w, const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale_shift(const double* x, double a, double b, double* out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace cdstack::kernels
