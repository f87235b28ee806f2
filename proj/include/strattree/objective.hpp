#pragma once

#include <limits>
#include <vector>

#include "strattree/fit_config.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace strattree {

// Per-stratum, per-arm pilot moments. Variances use the plug-in divisor
// n_a(k), matching the E[Y^2] - E[Y]^2 form of the empirical objective.
struct StratumMoments {
    struct Cell {
        std::size_t count = 0;
        double mean = 0.0;
        double var = 0.0;
    };
    // moments[k][a], k = 0-based stratum index, a = arm
    std::vector<std::vector<Cell>> cells;
    std::size_t total = 0;

    std::size_t stratum_size(std::size_t k) const {
        std::size_t n = 0;
        for (const auto& c : cells[k]) n += c.count;
        return n;
    }
};

StratumMoments compute_moments(const StratificationTree& tree, const Sample& sample);
StratumMoments compute_moments(const Sample& sample, const std::vector<int>& strata,
                               std::size_t num_strata, int num_arms);

constexpr double kInfiniteObjective = std::numeric_limits<double>::infinity();

// Neyman allocation sigma1/(sigma1+sigma0) clipped to [nu, 1-nu].
// Degenerate sigma1 = sigma0 = 0 returns 0.5.
double neyman_allocation(double sigma1, double sigma0, double nu);

// Empirical variance objective of the tree on the pilot sample. Returns
// +infinity when any stratum has fewer than config.min_cell_per_arm
// observations in either arm (empty strata included).
double empirical_variance(const StratificationTree& tree, const Sample& pilot,
                          const FitConfig& config);
// Variant reusing precomputed labels (EA hot path).
double empirical_variance(const Sample& pilot, const std::vector<int>& strata,
                          const StratificationTree& tree, const FitConfig& config);

// Same partition with every leaf pi replaced by the pilot Neyman allocation.
// Leaves with an empty arm (or no rows) get pi = 0.5.
StratificationTree optimize_leaf_proportions(const StratificationTree& tree, const Sample& pilot,
                                             const FitConfig& config);
// In-place variant on precomputed labels.
void optimize_leaf_proportions_inplace(StratificationTree& tree, const Sample& pilot,
                                       const std::vector<int>& strata, const FitConfig& config);

// Joint potential-outcome draws; produced by the sim module.
struct PotentialTable {
    std::vector<double> y0;
    std::vector<double> y1;
    std::vector<std::vector<double>> x;

    std::size_t size() const { return y0.size(); }
};

// Monte Carlo evaluation of the population variance V(T) on joint draws of
// (Y(0), Y(1), X). Test/benchmark facility.
double population_variance(const StratificationTree& tree, const PotentialTable& draws);

}  // namespace strattree
