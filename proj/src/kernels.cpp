#include "strattree/kernels.hpp"

#include <atomic>

namespace strattree::kernels {

namespace detail {

// Both backends accumulate in 4 independent lanes and combine as
// (l0 + l2) + (l1 + l3), so they agree bit-for-bit.

double sum_scalar(std::span<const double> xs) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        l0 += xs[i];
        l1 += xs[i + 1];
        l2 += xs[i + 2];
        l3 += xs[i + 3];
    }
    double tail = 0.0;
    for (; i < xs.size(); ++i) tail += xs[i];
    return (l0 + l2) + (l1 + l3) + tail;
}

SumPair sum_and_sum_sq_scalar(std::span<const double> xs) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    double q0 = 0.0, q1 = 0.0, q2 = 0.0, q3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        s0 += xs[i];
        q0 += xs[i] * xs[i];
        s1 += xs[i + 1];
        q1 += xs[i + 1] * xs[i + 1];
        s2 += xs[i + 2];
        q2 += xs[i + 2] * xs[i + 2];
        s3 += xs[i + 3];
        q3 += xs[i + 3] * xs[i + 3];
    }
    double st = 0.0, qt = 0.0;
    for (; i < xs.size(); ++i) {
        st += xs[i];
        qt += xs[i] * xs[i];
    }
    return {(s0 + s2) + (s1 + s3) + st, (q0 + q2) + (q1 + q3) + qt};
}

double sum_sq_diff_scalar(std::span<const double> xs, std::span<const double> ys) {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const double d0 = xs[i] - ys[i];
        const double d1 = xs[i + 1] - ys[i + 1];
        const double d2 = xs[i + 2] - ys[i + 2];
        const double d3 = xs[i + 3] - ys[i + 3];
        l0 += d0 * d0;
        l1 += d1 * d1;
        l2 += d2 * d2;
        l3 += d3 * d3;
    }
    double tail = 0.0;
    for (; i < xs.size(); ++i) {
        const double d = xs[i] - ys[i];
        tail += d * d;
    }
    return (l0 + l2) + (l1 + l3) + tail;
}

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && defined(STRATTREE_HAVE_AVX2_TU)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

std::atomic<bool> g_force_scalar{false};

bool use_avx2() { return cpu_has_avx2() && !g_force_scalar.load(std::memory_order_relaxed); }

}  // namespace

void force_scalar(bool on) { g_force_scalar.store(on, std::memory_order_relaxed); }

std::string_view active_backend() { return use_avx2() ? "avx2" : "scalar"; }

double sum(std::span<const double> xs) {
#if defined(__x86_64__) && defined(STRATTREE_HAVE_AVX2_TU)
    if (use_avx2()) return detail::sum_avx2(xs);
#endif
    return detail::sum_scalar(xs);
}

SumPair sum_and_sum_sq(std::span<const double> xs) {
#if defined(__x86_64__) && defined(STRATTREE_HAVE_AVX2_TU)
    if (use_avx2()) return detail::sum_and_sum_sq_avx2(xs);
#endif
    return detail::sum_and_sum_sq_scalar(xs);
}

double sum_sq_diff(std::span<const double> xs, std::span<const double> ys) {
#if defined(__x86_64__) && defined(STRATTREE_HAVE_AVX2_TU)
    if (use_avx2()) return detail::sum_sq_diff_avx2(xs, ys);
#endif
    return detail::sum_sq_diff_scalar(xs, ys);
}

}  // namespace strattree::kernels
