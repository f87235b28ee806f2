#include "strattree/assign.hpp"

#include <cmath>
#include <numeric>

namespace strattree {

namespace {

AssignmentPlan make_plan(const StratificationTree& tree,
                         const std::vector<std::vector<double>>& xs, std::uint64_t seed,
                         std::string procedure) {
    AssignmentPlan plan;
    plan.procedure = std::move(procedure);
    plan.seed = seed;
    plan.strata.reserve(xs.size());
    for (const auto& x : xs) plan.strata.push_back(tree.stratum_of(x));
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    const auto arms = static_cast<std::size_t>(tree.num_treatments()) + 1;
    plan.stratum_sizes.assign(K, 0);
    plan.arm_counts.assign(K, std::vector<std::size_t>(arms, 0));
    for (int s : plan.strata) plan.stratum_sizes[static_cast<std::size_t>(s - 1)]++;
    plan.treatments.assign(xs.size(), 0);
    return plan;
}

}  // namespace

AssignmentPlan assign_sbr(const StratificationTree& tree,
                          const std::vector<std::vector<double>>& xs, std::uint64_t seed) {
    auto plan = make_plan(tree, xs, seed, "sbr");
    const auto leaves = tree.leaves_in_label_order();
    Rng rng(derive_seed(seed, 0xA551u));

    for (std::size_t k = 0; k < leaves.size(); ++k) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < plan.strata.size(); ++i) {
            if (static_cast<std::size_t>(plan.strata[i] - 1) == k) members.push_back(i);
        }
        if (members.empty()) continue;
        rng.shuffle(members);
        const auto& pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi;
        const double nk = static_cast<double>(members.size());
        std::size_t pos = 0;
        for (std::size_t a = 0; a < pi.size(); ++a) {
            const auto na = static_cast<std::size_t>(std::floor(nk * pi[a]));
            for (std::size_t c = 0; c < na && pos < members.size(); ++c, ++pos) {
                plan.treatments[members[pos]] = static_cast<int>(a) + 1;
            }
            plan.arm_counts[k][a + 1] = na;
        }
        plan.arm_counts[k][0] = members.size() - pos;  // remainder to control
    }
    return plan;
}

AssignmentPlan assign_simple(const StratificationTree& tree,
                             const std::vector<std::vector<double>>& xs, std::uint64_t seed) {
    auto plan = make_plan(tree, xs, seed, "simple");
    const auto leaves = tree.leaves_in_label_order();
    Rng rng(derive_seed(seed, 0x51B3u));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto k = static_cast<std::size_t>(plan.strata[i] - 1);
        const auto& pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi;
        // inverse CDF over arms 1..J, remainder control
        const double u = rng.uniform();
        double acc = 0.0;
        int arm = 0;
        for (std::size_t a = 0; a < pi.size(); ++a) {
            acc += pi[a];
            if (u < acc) {
                arm = static_cast<int>(a) + 1;
                break;
            }
        }
        plan.treatments[i] = arm;
        plan.arm_counts[k][static_cast<std::size_t>(arm)]++;
    }
    return plan;
}

}  // namespace strattree
