#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "strattree/fit_config.hpp"
#include "strattree/objective.hpp"
#include "strattree/rng.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace strattree {

struct FitReport {
    StratificationTree tree;
    double objective = kInfiniteObjective;
    std::vector<double> trace;  // best objective per generation
    std::string terminated;     // "converged" | "max_iterations"
    int generations = 0;
    bool all_infinite = false;  // no finite-objective tree was ever found
};

// Candidate split thresholds per dimension: midpoints between consecutive
// distinct observed values (discrete dims: support points except the
// largest). config.split_grid, when nonempty, overrides.
std::vector<std::vector<double>> build_split_grid(const Sample& pilot, const FitConfig& config);

// Random initial population: depth-1 trees with a uniform dimension and a
// uniform candidate threshold, Neyman-optimized proportions.
std::vector<StratificationTree> generate_population(const Sample& pilot, const FitConfig& config,
                                                    const std::vector<std::vector<double>>& grid,
                                                    Rng& rng);

// One application of a uniformly chosen variation operator (split, prune,
// minor mutation, major mutation, crossover).
StratificationTree vary(const StratificationTree& parent,
                        std::span<const StratificationTree> population, const Sample& pilot,
                        const FitConfig& config, const std::vector<std::vector<double>>& grid,
                        Rng& rng);

// Evolutionary minimization of the empirical variance over trees of depth
// at most config.max_depth.
FitReport fit(const Sample& pilot, const FitConfig& config);

struct OracleResult {
    StratificationTree tree;
    double objective = kInfiniteObjective;
    std::size_t trees_evaluated = 0;
};

// Enumerates every canonically distinct tree of depth <= max_depth over
// the given grid and returns the global minimizer (ties resolved toward
// the smaller canonical structure). Refuses when the tree count exceeds
// eval_budget.
OracleResult exhaustive_search(const Sample& pilot, int max_depth,
                               const std::vector<std::vector<double>>& grid,
                               const FitConfig& config, std::size_t eval_budget = 10'000'000);

}  // namespace strattree
