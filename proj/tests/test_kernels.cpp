#include <doctest.h>

#include <cmath>
#include <vector>

#include "strattree/kernels.hpp"
#include "strattree/rng.hpp"

using namespace strattree;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, 3.0);
    return v;
}

}  // namespace

TEST_CASE("dispatched kernels match the scalar reference bit-for-bit") {
    Rng rng(2024);
    // lengths chosen to cover empty input, sub-block remainders, and
    // block-aligned sizes
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 31u, 64u, 1000u, 4097u}) {
        auto xs = random_vec(n, rng);
        auto ys = random_vec(n, rng);

        const double s_dispatch = kernels::sum(xs);
        const auto p_dispatch = kernels::sum_and_sum_sq(xs);
        const double d_dispatch = kernels::sum_sq_diff(xs, ys);

        kernels::force_scalar(true);
        CHECK(kernels::active_backend() == "scalar");
        const double s_scalar = kernels::sum(xs);
        const auto p_scalar = kernels::sum_and_sum_sq(xs);
        const double d_scalar = kernels::sum_sq_diff(xs, ys);
        kernels::force_scalar(false);

        // bit-identical, not approximately equal
        CHECK(s_dispatch == s_scalar);
        CHECK(p_dispatch.sum == p_scalar.sum);
        CHECK(p_dispatch.sum_sq == p_scalar.sum_sq);
        CHECK(d_dispatch == d_scalar);

        CHECK(kernels::detail::sum_scalar(xs) == s_scalar);
    }
}

TEST_CASE("kernel sums agree with a long double reference") {
    Rng rng(77);
    auto xs = random_vec(1234, rng);
    auto ys = random_vec(1234, rng);
    long double s = 0.0L, sq = 0.0L, d = 0.0L;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        s += xs[i];
        sq += static_cast<long double>(xs[i]) * xs[i];
        const long double diff = static_cast<long double>(xs[i]) - ys[i];
        d += diff * diff;
    }
    CHECK(kernels::sum(xs) == doctest::Approx(static_cast<double>(s)).epsilon(1e-12));
    CHECK(kernels::sum_and_sum_sq(xs).sum_sq ==
          doctest::Approx(static_cast<double>(sq)).epsilon(1e-12));
    CHECK(kernels::sum_sq_diff(xs, ys) == doctest::Approx(static_cast<double>(d)).epsilon(1e-12));
}

TEST_CASE("active_backend reports a known name") {
    const auto b = kernels::active_backend();
    CHECK((b == "avx2" || b == "scalar"));
}
