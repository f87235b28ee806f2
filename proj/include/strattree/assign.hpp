#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strattree/rng.hpp"
#include "strattree/tree.hpp"

namespace strattree {

struct AssignmentPlan {
    std::vector<int> strata;      // per unit, 1..K
    std::vector<int> treatments;  // per unit, 0..J
    std::vector<std::size_t> stratum_sizes;            // n(k), index k-1
    std::vector<std::vector<std::size_t>> arm_counts;  // n_a(k), [k-1][a]
    std::string procedure;        // "sbr" | "simple"
    std::uint64_t seed = 0;
};

// Stratified block randomization: within each stratum exactly
// floor(n(k) * pi_a(k)) units get arm a (sequential floors for multiple
// treatments, remainder to control), uniformly over assignments.
AssignmentPlan assign_sbr(const StratificationTree& tree,
                          const std::vector<std::vector<double>>& xs, std::uint64_t seed);

// Simple random assignment: independent draws with the leaf's target
// proportions.
AssignmentPlan assign_simple(const StratificationTree& tree,
                             const std::vector<std::vector<double>>& xs, std::uint64_t seed);

}  // namespace strattree
