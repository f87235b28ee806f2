#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Reduction kernels used by the moment and Monte Carlo inner loops.
// A scalar reference implementation always exists; on x86-64 an AVX2
// variant is selected at runtime when the CPU supports it. Both variants
// use the same blocked accumulation order so results match bit-for-bit.

namespace strattree::kernels {

struct SumPair {
    double sum = 0.0;
    double sum_sq = 0.0;
};

double sum(std::span<const double> xs);
SumPair sum_and_sum_sq(std::span<const double> xs);
// sum of (x - y)^2, used for RMSE-style aggregation
double sum_sq_diff(std::span<const double> xs, std::span<const double> ys);

namespace detail {
double sum_scalar(std::span<const double> xs);
SumPair sum_and_sum_sq_scalar(std::span<const double> xs);
double sum_sq_diff_scalar(std::span<const double> xs, std::span<const double> ys);
#if defined(__x86_64__)
double sum_avx2(std::span<const double> xs);
SumPair sum_and_sum_sq_avx2(std::span<const double> xs);
double sum_sq_diff_avx2(std::span<const double> xs, std::span<const double> ys);
#endif
}  // namespace detail

// "avx2" or "scalar"
std::string_view active_backend();
// Test hook: force the scalar path (pass false to restore dispatch).
void force_scalar(bool on);

}  // namespace strattree::kernels
