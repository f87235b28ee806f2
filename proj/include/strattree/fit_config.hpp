#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace strattree {

class Sample;
class StratificationTree;

struct EaConfig {
    std::size_t population = 200;
    int max_iterations = 2000;
    int patience = 50;          // consecutive converged generations required
    double tolerance = 1e-8;    // relative spread of the top 5%
    std::uint64_t seed = 0;
};

struct FitConfig {
    int max_depth = 3;              // L
    double nu = 0.1;                // proportion clip
    int min_cell_per_arm = 2;
    EaConfig ea;
    // Candidate split thresholds per dimension. Empty: derived from the
    // pilot data (midpoints between consecutive distinct observed values;
    // discrete dimensions use their support points).
    std::vector<std::vector<double>> split_grid;

    // Strategy hooks letting the search minimize an alternative criterion
    // (e.g. the multi-treatment E-optimality objective). Unset: scalar
    // empirical variance with per-leaf Neyman proportions.
    std::function<double(const Sample&, const std::vector<int>&, const StratificationTree&,
                         const FitConfig&)>
        objective_hook;
    std::function<void(StratificationTree&, const Sample&, const std::vector<int>&,
                       const FitConfig&)>
        proportions_hook;

    void validate() const {
        if (!(nu > 0.0 && nu < 0.5)) throw std::invalid_argument("nu must lie in (0, 0.5)");
        if (ea.population < 2) throw std::invalid_argument("ea.population must be >= 2");
        if (!(ea.tolerance > 0.0)) throw std::invalid_argument("ea.tolerance must be > 0");
        if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    }
};

}  // namespace strattree
