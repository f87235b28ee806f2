#pragma once

#include <map>
#include <vector>

#include "strattree/fit_config.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace strattree {

struct StratumEstimate {
    int label = 0;            // k
    std::size_t n = 0;        // n(k)
    std::size_t n1 = 0;       // n_1(k)
    double beta = 0.0;        // within-stratum difference in means
    double var1 = 0.0;        // plug-in outcome variances
    double var0 = 0.0;
};

struct EstimateResult {
    double theta_hat = 0.0;
    double v_hat = 0.0;  // variance of sqrt(n) (theta_hat - theta)
    double v_h = 0.0;
    double v_y = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    std::size_t n = 0;
    std::vector<StratumEstimate> strata;

    double se() const;  // standard error of theta_hat
};

// quantile of the standard normal (Acklam's rational approximation)
double normal_quantile(double p);

// Stratified difference-in-means ATE estimator with the consistent
// variance decomposition v_hat = v_h + v_y. A stratum with observations
// in only one arm is an error unless drop_empty_arms is set, in which
// case it is excluded and the remaining stratum weights renormalize
// (simulation harness use; such strata carry vanishing mass).
EstimateResult estimate_ate(const StratificationTree& tree, const Sample& wave2,
                            double level = 0.95, bool drop_empty_arms = false);

// Strata-fixed-effects estimator; only valid under equal targets across
// strata with SBR assignment, and refuses unequal targets.
EstimateResult estimate_ate_sfe(const StratificationTree& tree, const Sample& wave2,
                                double level = 0.95);

// Sample-size-weighted combination of a pilot estimate and the wave-2
// estimate.
EstimateResult estimate_pooled(const EstimateResult& pilot_result,
                               const EstimateResult& wave2_result);

// true when tree's top levels of cuts coincide with subgroup_tree
bool is_extension(const StratificationTree& tree, const StratificationTree& subgroup_tree);

struct SubgroupEstimates {
    std::map<int, EstimateResult> by_subgroup;  // g -> estimate
    EstimateResult global;
};

// Subgroup ATE estimators over the leaves of tree that fall under each
// terminal node of subgroup_tree. tree must be an extension of
// subgroup_tree.
SubgroupEstimates estimate_subgroups(const StratificationTree& tree,
                                     const StratificationTree& subgroup_tree, const Sample& wave2,
                                     double level = 0.95);

// Fits an optimal tree within each subgroup cell (depth budget
// config.max_depth minus the subgroup tree's depth) and grafts the results
// under subgroup_tree.
StratificationTree fit_subgroup_tree(const Sample& pilot, const StratificationTree& subgroup_tree,
                                     const FitConfig& config);

}  // namespace strattree
