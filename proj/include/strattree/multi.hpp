#pragma once

#include <vector>

#include "strattree/fit_config.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace strattree {

// Symmetric J x J estimate of the asymptotic variance matrix of the
// treatment-effect vector (arms 1..J vs control).
struct VarianceMatrix {
    int dim = 0;
    std::vector<double> data;  // row-major, dim * dim
    // set when some stratum falls below the per-arm cell minimum; entries
    // are meaningless in that case and the objective scores +infinity
    bool infinite = false;

    VarianceMatrix() = default;
    explicit VarianceMatrix(int J) : dim(J), data(static_cast<std::size_t>(J) * J, 0.0) {}

    double& at(int i, int j) { return data[static_cast<std::size_t>(i) * dim + j]; }
    double at(int i, int j) const { return data[static_cast<std::size_t>(i) * dim + j]; }
};

// Plug-in empirical variance matrix of the tree on a pilot with arms
// 0..J. At J = 1 this reduces to the 1x1 scalar objective.
VarianceMatrix empirical_variance_matrix(const StratificationTree& tree, const Sample& pilot,
                                         const FitConfig& config);
VarianceMatrix empirical_variance_matrix(const Sample& pilot, const std::vector<int>& strata,
                                         const StratificationTree& tree, const FitConfig& config);

// Largest eigenvalue of a symmetric matrix (E-optimality criterion).
// +infinity for an infinite-flagged matrix; throws when the input is
// asymmetric beyond tolerance.
double e_optimal_objective(const VarianceMatrix& v);

// Largest eigenvalue of a symmetric matrix given row-major, cyclic Jacobi.
double largest_eigenvalue(std::vector<double> a, int n);

// Per-stratum treatment proportions minimizing the largest eigenvalue of
// outer + (var[0]/pi_0) * ones + diag(var[a]/pi_a) over the simplex with
// every component clipped to [nu, 1-nu]. `outer` is the J x J centered
// contrast term (may be empty = zero) and var has length J + 1 (control
// first). Returns pi for arms 1..J; the control share is the remainder.
std::vector<double> optimize_stratum_allocation(const std::vector<double>& var,
                                                const std::vector<double>& outer, double nu,
                                                double tolerance = 1e-8);

// Installs objective/proportions hooks on the config so fit() minimizes
// the E-optimality objective with numerically optimized vector targets.
FitConfig with_multi_objective(FitConfig config);

struct MultiEstimateResult {
    std::vector<double> theta_hat;  // arm a = 1..J
    VarianceMatrix v_hat;           // variance of sqrt(n) (theta_hat - theta)
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    double level = 0.95;
    std::size_t n = 0;
};

// Stratified treatment-effect vector estimator with the empirical
// variance-matrix form; per-arm confidence intervals use the diagonal.
MultiEstimateResult estimate_ate_multi(const StratificationTree& tree, const Sample& wave2,
                                       double level = 0.95);

}  // namespace strattree
