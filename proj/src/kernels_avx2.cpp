#include <immintrin.h>

#include "strattree/kernels.hpp"

namespace strattree::kernels::detail {

double sum_avx2(std::span<const double> xs) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(xs.data() + i));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0.0;
    for (; i < xs.size(); ++i) tail += xs[i];
    return (lane[0] + lane[2]) + (lane[1] + lane[3]) + tail;
}

SumPair sum_and_sum_sq_avx2(std::span<const double> xs) {
    __m256d s = _mm256_setzero_pd();
    __m256d q = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d v = _mm256_loadu_pd(xs.data() + i);
        s = _mm256_add_pd(s, v);
        q = _mm256_add_pd(q, _mm256_mul_pd(v, v));
    }
    alignas(32) double ls[4], lq[4];
    _mm256_store_pd(ls, s);
    _mm256_store_pd(lq, q);
    double st = 0.0, qt = 0.0;
    for (; i < xs.size(); ++i) {
        st += xs[i];
        qt += xs[i] * xs[i];
    }
    return {(ls[0] + ls[2]) + (ls[1] + ls[3]) + st, (lq[0] + lq[2]) + (lq[1] + lq[3]) + qt};
}

double sum_sq_diff_avx2(std::span<const double> xs, std::span<const double> ys) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    const std::size_t n4 = xs.size() & ~std::size_t{3};
    for (; i < n4; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(xs.data() + i), _mm256_loadu_pd(ys.data() + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double tail = 0.0;
    for (; i < xs.size(); ++i) {
        const double d = xs[i] - ys[i];
        tail += d * d;
    }
    return (lane[0] + lane[2]) + (lane[1] + lane[3]) + tail;
}

}  // namespace strattree::kernels::detail
