#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "strattree/fit_config.hpp"
#include "strattree/objective.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace strattree {

// A two-arm data-generating process: Y(a) = kappa_a(X) + nu_a(X) * eps_a
// with eps_a ~ N(0, noise_sd^2) and X ~ iid Beta(2, 5) per coordinate.
struct DgpSpec {
    int model = 0;  // 1 | 2 | 3, 0 = custom
    std::size_t d = 0;
    double noise_sd = 0.0;
    double true_ate = 0.0;  // published ground truth
    std::function<double(const std::vector<double>&)> kappa0, kappa1, nu0, nu1;

    CovariateSpace space() const;

    static DgpSpec model1();
    static DgpSpec model2();
    static DgpSpec model3();
    static DgpSpec by_id(int model);
};

// n i.i.d. joint draws of (Y(0), Y(1), X); deterministic under seed.
PotentialTable draw(const DgpSpec& dgp, std::size_t n, std::uint64_t seed);

// Builds a Sample from drawn potentials and an assignment vector
// (observed outcome = potential of the assigned arm).
Sample observe(const PotentialTable& draws, const std::vector<int>& treatments,
               const CovariateSpace& space);

// Ad-hoc stratification: per level pick one covariate at random and split
// every current cell at its midpoint on that covariate; all targets 0.5.
StratificationTree make_adhoc_tree(const CovariateSpace& space, int depth, std::uint64_t seed);

// The published infeasible-optimal tree for the given model (fixture).
StratificationTree infeasible_tree(int model);

// Plug-in population objective of the tree under the DGP, evaluated on
// n_mc fresh draws.
double population_variance(const DgpSpec& dgp, const StratificationTree& tree, std::size_t n_mc,
                           std::uint64_t seed);

struct MetricsRow {
    std::string method;
    double coverage = 0.0;      // percent
    double delta_length = 0.0;  // percent vs "none"
    double power = 0.0;         // percent, t-test of ATE = 0 at 5%
    double delta_rmse = 0.0;    // percent vs "none"
    double avg_length = 0.0;
    double rmse = 0.0;
    double coverage_se = 0.0;   // MC standard errors (percent scale)
    double power_se = 0.0;
    double rmse_se = 0.0;
    int reps = 0;
};

struct StudyConfig {
    std::size_t pilot_n = 500;
    std::size_t main_n = 4500;
    int reps = 500;
    double level = 0.95;
    std::uint64_t seed = 0;
    FitConfig fit;      // tree depth and EA settings for strat_tree/cv_tree
    int threads = 0;    // 0 = hardware concurrency; results independent of it
};

// Monte Carlo evaluation of stratification methods drawn from
// {none, adhoc, strat_tree, cv_tree, infeasible}. Per rep: draw a pilot,
// assign it by simple randomization at 0.5, fit each method's tree, draw
// the main wave, SBR-assign, and compute the pooled sample-size-weighted
// estimate. Rows come back in the order methods were given.
std::vector<MetricsRow> run_study(const DgpSpec& dgp, const std::vector<std::string>& methods,
                                  const StudyConfig& config);

// Aligned text rendering of the metric rows (CLI display).
std::string format_metrics(const std::vector<MetricsRow>& rows);

}  // namespace strattree
