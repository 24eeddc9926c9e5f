#include "cdstack/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace cdstack::kernels {

namespace {

struct Vtable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*dot3)(const double*, const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale_shift)(const double*, double, double, double*, std::size_t);
};

constexpr Vtable kScalar{ref::dot, ref::dot3, ref::sum, ref::axpy, ref::scale_shift};

#ifdef CDSTACK_HAVE_AVX2
constexpr Vtable kAvx2{avx2::dot, avx2::dot3, avx2::sum, avx2::axpy, avx2::scale_shift};
#endif

Backend g_backend = Backend::Scalar;
const Vtable* g_vt = &kScalar;
bool g_initialized = false;

void apply(Backend b) {
    switch (b) {
        case Backend::Scalar:
            g_vt = &kScalar;
            break;
        case Backend::Avx2:
#ifdef CDSTACK_HAVE_AVX2
            g_vt = &kAvx2;
            break;
#else
            throw std::runtime_error("AVX2 backend not compiled in");
#endif
    }
    g_backend = b;
}

void init_once() {
    if (g_initialized) return;
    g_initialized = true;
    Backend b = avx2_supported() ? Backend::Avx2 : Backend::Scalar;
    if (const char* env = std::getenv("CDSTACK_SIMD")) {
        std::string v(env);
        if (v == "scalar") b = Backend::Scalar;
        else if (v == "avx2" && avx2_supported()) b = Backend::Avx2;
        // "auto" or anything else keeps the detected backend
    }
    apply(b);
}

}  // namespace

bool avx2_supported() {
#if defined(CDSTACK_HAVE_AVX2) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() {
    init_once();
    return g_backend;
}

void select_backend(Backend b) {
    init_once();
    if (b == Backend::Avx2 && !avx2_supported())
        throw std::runtime_error("AVX2 not supported on this CPU");
    apply(b);
}

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
    init_once();
    return g_vt->dot(a, b, n);
}

double dot3(const double* w, const double* a, const double* b, std::size_t n) {
    init_once();
    return g_vt->dot3(w, a, b, n);
}

double sum(const double* a, std::size_t n) {
    init_once();
    return g_vt->sum(a, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    init_once();
    g_vt->axpy(alpha, x, y, n);
}

void scale_shift(const double* x, double a, double b, double* out, std::size_t n) {
    init_once();
    g_vt->scale_shift(x, a, b, out, n);
}

}  // namespace cdstack::kernels
