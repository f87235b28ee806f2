#include "strattree/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace strattree {

StratumMoments compute_moments(const Sample& sample, const std::vector<int>& strata,
                               std::size_t num_strata, int num_arms) {
    StratumMoments m;
    m.total = sample.size();
    const auto arms = static_cast<std::size_t>(num_arms);
    std::vector<std::size_t> cnt(num_strata * arms, 0);
    std::vector<double> sum(num_strata * arms, 0.0);
    std::vector<double> ssq(num_strata * arms, 0.0);
    const auto& rows = sample.rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t idx = static_cast<std::size_t>(strata[i]) * arms +
                                static_cast<std::size_t>(rows[i].a);
        const double y = rows[i].y;
        cnt[idx]++;
        sum[idx] += y;
        ssq[idx] += y * y;
    }
    m.cells.assign(num_strata, std::vector<StratumMoments::Cell>(arms));
    for (std::size_t k = 0; k < num_strata; ++k) {
        for (std::size_t a = 0; a < arms; ++a) {
            auto& c = m.cells[k][a];
            const std::size_t idx = k * arms + a;
            c.count = cnt[idx];
            if (c.count > 0) {
                c.mean = sum[idx] / static_cast<double>(c.count);
                c.var = std::max(0.0, ssq[idx] / static_cast<double>(c.count) - c.mean * c.mean);
            }
        }
    }
    return m;
}

StratumMoments compute_moments(const StratificationTree& tree, const Sample& sample) {
    const auto strata = stratum_indices(tree, sample);
    return compute_moments(sample, strata, static_cast<std::size_t>(tree.leaf_count()),
                           sample.num_arms());
}

double neyman_allocation(double sigma1, double sigma0, double nu) {
    if (!(nu > 0.0 && nu < 0.5)) throw std::invalid_argument("nu must lie in (0, 0.5)");
    if (sigma1 < 0.0 || sigma0 < 0.0) throw std::invalid_argument("sigmas must be nonnegative");
    if (sigma1 == 0.0 && sigma0 == 0.0) return 0.5;
    return std::clamp(sigma1 / (sigma1 + sigma0), nu, 1.0 - nu);
}

double empirical_variance(const Sample& pilot, const std::vector<int>& strata,
                          const StratificationTree& tree, const FitConfig& config) {
    if (pilot.num_arms() != 2) {
        throw std::invalid_argument(
            "scalar objective expects treatment labels {0, 1}; use the matrix objective for "
            "multiple treatments");
    }
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    const auto moments = compute_moments(pilot, strata, K, 2);
    const double m = static_cast<double>(pilot.size());

    // overall difference in arm means
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c0 = moments.cells[k][0];
        const auto& c1 = moments.cells[k][1];
        sum0 += c0.mean * static_cast<double>(c0.count);
        sum1 += c1.mean * static_cast<double>(c1.count);
        n0 += c0.count;
        n1 += c1.count;
    }
    const double theta = sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);

    const auto leaves = tree.leaves_in_label_order();
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c0 = moments.cells[k][0];
        const auto& c1 = moments.cells[k][1];
        if (c0.count < static_cast<std::size_t>(config.min_cell_per_arm) ||
            c1.count < static_cast<std::size_t>(config.min_cell_per_arm)) {
            return kInfiniteObjective;
        }
        const double share = static_cast<double>(c0.count + c1.count) / m;
        const double beta = c1.mean - c0.mean;
        const double pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi[0];
        v += share * ((beta - theta) * (beta - theta) + c0.var / (1.0 - pi) + c1.var / pi);
    }
    return v;
}

double empirical_variance(const StratificationTree& tree, const Sample& pilot,
                          const FitConfig& config) {
    return empirical_variance(pilot, stratum_indices(tree, pilot), tree, config);
}

void optimize_leaf_proportions_inplace(StratificationTree& tree, const Sample& pilot,
                                       const std::vector<int>& strata, const FitConfig& config) {
    if (pilot.num_arms() != 2) {
        throw std::invalid_argument(
            "scalar Neyman step expects treatment labels {0, 1}; use the multi-treatment "
            "proportions hook");
    }
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    const auto moments = compute_moments(pilot, strata, K, 2);
    const auto leaves = tree.leaves_in_label_order();
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c0 = moments.cells[k][0];
        const auto& c1 = moments.cells[k][1];
        double pi = 0.5;
        if (c0.count > 0 && c1.count > 0) {
            pi = neyman_allocation(std::sqrt(c1.var), std::sqrt(c0.var), config.nu);
        }
        tree.nodes()[static_cast<std::size_t>(leaves[k])].pi = {pi};
    }
}

StratificationTree optimize_leaf_proportions(const StratificationTree& tree, const Sample& pilot,
                                             const FitConfig& config) {
    StratificationTree out = tree;
    optimize_leaf_proportions_inplace(out, pilot, stratum_indices(out, pilot), config);
    return out;
}

double population_variance(const StratificationTree& tree, const PotentialTable& draws) {
    if (draws.size() == 0) throw std::invalid_argument("population_variance needs at least one draw");
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    std::vector<std::size_t> cnt(K, 0);
    std::vector<double> s0(K, 0.0), q0(K, 0.0), s1(K, 0.0), q1(K, 0.0), sd(K, 0.0);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto k = static_cast<std::size_t>(tree.stratum_of(draws.x[i]) - 1);
        cnt[k]++;
        s0[k] += draws.y0[i];
        q0[k] += draws.y0[i] * draws.y0[i];
        s1[k] += draws.y1[i];
        q1[k] += draws.y1[i] * draws.y1[i];
        sd[k] += draws.y1[i] - draws.y0[i];
    }
    const double n = static_cast<double>(draws.size());
    double theta = 0.0;
    for (std::size_t k = 0; k < K; ++k) theta += sd[k];
    theta /= n;
    const auto leaves = tree.leaves_in_label_order();
    double v = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        if (cnt[k] == 0) continue;
        const double nk = static_cast<double>(cnt[k]);
        const double m0 = s0[k] / nk, m1 = s1[k] / nk;
        const double var0 = std::max(0.0, q0[k] / nk - m0 * m0);
        const double var1 = std::max(0.0, q1[k] / nk - m1 * m1);
        const double te = sd[k] / nk;
        const double pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi[0];
        v += (nk / n) * ((te - theta) * (te - theta) + var0 / (1.0 - pi) + var1 / pi);
    }
    return v;
}

}  // namespace strattree
