#include <cmath>
#include <vector>

#include "doctest.h"

#include "cdstack/kernels.hpp"
#include "cdstack/rng.hpp"

using namespace cdstack;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar reference basics") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    const std::vector<double> b{4.0, -5.0, 6.0};
    CHECK(kernels::ref::dot(a.data(), b.data(), 3) == doctest::Approx(12.0));
    CHECK(kernels::ref::sum(a.data(), 3) == doctest::Approx(6.0));
    const std::vector<double> w{0.5, 2.0, 1.0};
    CHECK(kernels::ref::dot3(w.data(), a.data(), b.data(), 3) ==
          doctest::Approx(0.5 * 4.0 - 2.0 * 10.0 + 18.0));

    std::vector<double> y{1.0, 1.0, 1.0};
    kernels::ref::axpy(2.0, a.data(), y.data(), 3);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[2] == doctest::Approx(7.0));

    std::vector<double> out(3);
    kernels::ref::scale_shift(a.data(), 2.0, -1.0, out.data(), 3);
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[2] == doctest::Approx(5.0));
}

TEST_CASE("dispatched backends agree with the scalar reference") {
    Rng rng(20240601);
    const std::vector<std::size_t> sizes{0, 1, 3, 4, 7, 8, 31, 100, 1000, 4097};
    for (std::size_t n : sizes) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        auto w = random_vec(rng, n);
        for (auto& x : w) x = std::fabs(x);

        const double scale = 1.0 + static_cast<double>(n);
        CHECK(kernels::dot(a.data(), b.data(), n) ==
              doctest::Approx(kernels::ref::dot(a.data(), b.data(), n)).epsilon(1e-12).scale(scale));
        CHECK(kernels::dot3(w.data(), a.data(), b.data(), n) ==
              doctest::Approx(kernels::ref::dot3(w.data(), a.data(), b.data(), n))
                  .epsilon(1e-12)
                  .scale(scale));
        CHECK(kernels::sum(a.data(), n) ==
              doctest::Approx(kernels::ref::sum(a.data(), n)).epsilon(1e-12).scale(scale));

        auto y1 = random_vec(rng, n);
        auto y2 = y1;
        kernels::axpy(0.37, a.data(), y1.data(), n);
        kernels::ref::axpy(0.37, a.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-13));

        std::vector<double> o1(n), o2(n);
        kernels::scale_shift(a.data(), 1.7, -0.3, o1.data(), n);
        kernels::ref::scale_shift(a.data(), 1.7, -0.3, o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));
    }
}

#ifdef CDSTACK_HAVE_AVX2
TEST_CASE("avx2 variant matches scalar when supported") {
    if (!kernels::avx2_supported()) return;
    Rng rng(7);
    for (std::size_t n : {5, 16, 257, 2048}) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        const double d_ref = kernels::ref::dot(a.data(), b.data(), n);
        const double d_avx = kernels::avx2::dot(a.data(), b.data(), n);
        CHECK(d_avx == doctest::Approx(d_ref).epsilon(1e-12).scale(1.0 + std::fabs(d_ref)));
        CHECK(kernels::avx2::sum(a.data(), n) ==
              doctest::Approx(kernels::ref::sum(a.data(), n)).epsilon(1e-12).scale(1.0 + n));
    }
}

TEST_CASE("backend selection is explicit and reversible") {
    if (!kernels::avx2_supported()) return;
    const kernels::Backend before = kernels::active_backend();
    kernels::select_backend(kernels::Backend::Scalar);
    CHECK(kernels::active_backend() == kernels::Backend::Scalar);
    kernels::select_backend(kernels::Backend::Avx2);
    CHECK(kernels::active_backend() == kernels::Backend::Avx2);
    kernels::select_backend(before);
}
#endif

TEST_CASE("dot is symmetric per backend") {
    Rng rng(99);
    auto a = random_vec(rng, 129);
    auto b = random_vec(rng, 129);
    CHECK(kernels::dot(a.data(), b.data(), 129) == kernels::dot(b.data(), a.data(), 129));
}

}  // TEST_SUITE
