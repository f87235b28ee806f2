#include "strattree/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "strattree/objective.hpp"
#include "strattree/search.hpp"

namespace strattree {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile needs p in (0,1)");
    // Acklam's rational approximation, |relative error| < 1.15e-9
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double EstimateResult::se() const { return std::sqrt(v_hat / static_cast<double>(n)); }

namespace {

std::vector<StratumEstimate> stratum_table(const StratificationTree& tree, const Sample& wave2,
                                           bool drop_empty_arms) {
    if (wave2.num_arms() != 2) {
        throw std::invalid_argument("scalar estimator expects treatment labels {0, 1}");
    }
    const auto moments = compute_moments(tree, wave2);
    std::vector<StratumEstimate> table;
    std::string offenders;
    for (std::size_t k = 0; k < moments.cells.size(); ++k) {
        const auto& c0 = moments.cells[k][0];
        const auto& c1 = moments.cells[k][1];
        if (c0.count + c1.count == 0) continue;  // empty stratum carries no weight
        if (c0.count == 0 || c1.count == 0) {
            if (!drop_empty_arms) {
                if (!offenders.empty()) offenders += ", ";
                offenders += std::to_string(k + 1);
            }
            continue;
        }
        StratumEstimate s;
        s.label = static_cast<int>(k + 1);
        s.n = c0.count + c1.count;
        s.n1 = c1.count;
        s.beta = c1.mean - c0.mean;
        s.var0 = c0.var;
        s.var1 = c1.var;
        table.push_back(s);
    }
    if (!offenders.empty()) {
        throw std::runtime_error("strata with an empty treatment arm: {" + offenders +
                                 "}; cannot estimate within-stratum contrasts");
    }
    return table;
}

void finish_result(EstimateResult& r, double level) {
    r.level = level;
    r.v_hat = r.v_h + r.v_y;
    const double z = normal_quantile(0.5 + level / 2.0);
    const double half = z * std::sqrt(r.v_hat / static_cast<double>(r.n));
    r.ci_low = r.theta_hat - half;
    r.ci_high = r.theta_hat + half;
}

}  // namespace

EstimateResult estimate_ate(const StratificationTree& tree, const Sample& wave2, double level,
                            bool drop_empty_arms) {
    if (wave2.empty()) throw std::invalid_argument("empty sample");
    EstimateResult r;
    r.strata = stratum_table(tree, wave2, drop_empty_arms);
    if (r.strata.empty()) throw std::runtime_error("no stratum has both arms populated");
    r.n = 0;
    for (const auto& s : r.strata) r.n += s.n;
    const double n = static_cast<double>(r.n);
    for (const auto& s : r.strata) {
        r.theta_hat += (static_cast<double>(s.n) / n) * s.beta;
    }
    for (const auto& s : r.strata) {
        const double share = static_cast<double>(s.n) / n;
        r.v_h += share * (s.beta - r.theta_hat) * (s.beta - r.theta_hat);
        const std::size_t n0 = s.n - s.n1;
        r.v_y += n * share * share *
                 (s.var1 / static_cast<double>(s.n1) + s.var0 / static_cast<double>(n0));
    }
    finish_result(r, level);
    return r;
}

EstimateResult estimate_ate_sfe(const StratificationTree& tree, const Sample& wave2, double level) {
    const auto leaves = tree.leaves_in_label_order();
    const double pi0 = tree.nodes()[static_cast<std::size_t>(leaves[0])].pi[0];
    for (int idx : leaves) {
        if (tree.nodes()[static_cast<std::size_t>(idx)].pi[0] != pi0) {
            throw std::runtime_error(
                "strata-fixed-effects estimator is not consistent when assignment targets "
                "differ across strata; use estimate_ate");
        }
    }
    EstimateResult r = estimate_ate(tree, wave2, level);

    // within-stratum demeaned OLS slope of y on a
    const auto strata = stratum_indices(tree, wave2);
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    std::vector<double> sy(K, 0.0), sa(K, 0.0);
    std::vector<std::size_t> cnt(K, 0);
    const auto& rows = wave2.rows();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto k = static_cast<std::size_t>(strata[i]);
        sy[k] += rows[i].y;
        sa[k] += rows[i].a;
        cnt[k]++;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto k = static_cast<std::size_t>(strata[i]);
        const double nk = static_cast<double>(cnt[k]);
        const double yd = rows[i].y - sy[k] / nk;
        const double ad = rows[i].a - sa[k] / nk;
        num += yd * ad;
        den += ad * ad;
    }
    if (den == 0.0) throw std::runtime_error("no treatment variation within strata");
    r.theta_hat = num / den;
    finish_result(r, level);
    return r;
}

EstimateResult estimate_pooled(const EstimateResult& pilot_result,
                               const EstimateResult& wave2_result) {
    if (pilot_result.n == 0) return wave2_result;
    const double m = static_cast<double>(pilot_result.n);
    const double total = m + static_cast<double>(wave2_result.n);
    const double lambda = m / total;
    EstimateResult r;
    r.n = pilot_result.n + wave2_result.n;
    r.theta_hat = lambda * pilot_result.theta_hat + (1.0 - lambda) * wave2_result.theta_hat;
    r.v_h = lambda * pilot_result.v_h + (1.0 - lambda) * wave2_result.v_h;
    r.v_y = lambda * pilot_result.v_y + (1.0 - lambda) * wave2_result.v_y;
    finish_result(r, wave2_result.level);
    return r;
}

bool is_extension(const StratificationTree& tree, const StratificationTree& subgroup_tree) {
    std::function<bool(int, int)> walk = [&](int t_idx, int s_idx) -> bool {
        const auto& sn = subgroup_tree.nodes()[static_cast<std::size_t>(s_idx)];
        if (sn.is_leaf()) return true;
        const auto& tn = tree.nodes()[static_cast<std::size_t>(t_idx)];
        if (tn.is_leaf() || !(tn.cut == sn.cut)) return false;
        return walk(tn.left, sn.left) && walk(tn.right, sn.right);
    };
    return walk(tree.root(), subgroup_tree.root());
}

SubgroupEstimates estimate_subgroups(const StratificationTree& tree,
                                     const StratificationTree& subgroup_tree, const Sample& wave2,
                                     double level) {
    // locate the first divergent cut for the error message
    std::function<const Cut*(int, int)> diverge = [&](int t_idx, int s_idx) -> const Cut* {
        const auto& sn = subgroup_tree.nodes()[static_cast<std::size_t>(s_idx)];
        if (sn.is_leaf()) return nullptr;
        const auto& tn = tree.nodes()[static_cast<std::size_t>(t_idx)];
        if (tn.is_leaf() || !(tn.cut == sn.cut)) return &sn.cut;
        if (const Cut* c = diverge(tn.left, sn.left)) return c;
        return diverge(tn.right, sn.right);
    };
    if (const Cut* c = diverge(tree.root(), subgroup_tree.root())) {
        throw std::invalid_argument("tree is not an extension of the subgroup tree; first "
                                    "divergent cut: x" + std::to_string(c->dim + 1) + " <= " +
                                    std::to_string(c->threshold));
    }

    SubgroupEstimates out;
    out.global = estimate_ate(tree, wave2, level);

    // leaf labels of `tree` under each subgroup node
    std::map<int, std::vector<int>> members;  // g -> labels k
    std::function<void(int, int)> collect_pair = [&](int t_idx, int s_idx) {
        const auto& sn = subgroup_tree.nodes()[static_cast<std::size_t>(s_idx)];
        if (sn.is_leaf()) {
            std::function<void(int)> leaves = [&](int idx) {
                const auto& n = tree.nodes()[static_cast<std::size_t>(idx)];
                if (n.is_leaf()) {
                    members[sn.label].push_back(n.label);
                } else {
                    leaves(n.left);
                    leaves(n.right);
                }
            };
            leaves(t_idx);
            return;
        }
        const auto& tn = tree.nodes()[static_cast<std::size_t>(t_idx)];
        collect_pair(tn.left, sn.left);
        collect_pair(tn.right, sn.right);
    };
    collect_pair(tree.root(), subgroup_tree.root());

    for (const auto& [g, labels] : members) {
        EstimateResult r;
        for (const auto& s : out.global.strata) {
            if (std::find(labels.begin(), labels.end(), s.label) != labels.end()) {
                r.strata.push_back(s);
                r.n += s.n;
            }
        }
        if (r.n == 0) continue;  // no wave-2 rows in this subgroup
        const double ng = static_cast<double>(r.n);
        for (const auto& s : r.strata) r.theta_hat += (static_cast<double>(s.n) / ng) * s.beta;
        for (const auto& s : r.strata) {
            const double share = static_cast<double>(s.n) / ng;
            r.v_h += share * (s.beta - r.theta_hat) * (s.beta - r.theta_hat);
            const std::size_t n0 = s.n - s.n1;
            r.v_y += ng * share * share *
                     (s.var1 / static_cast<double>(s.n1) + s.var0 / static_cast<double>(n0));
        }
        finish_result(r, level);
        out.by_subgroup[g] = std::move(r);
    }
    return out;
}

StratificationTree fit_subgroup_tree(const Sample& pilot, const StratificationTree& subgroup_tree,
                                     const FitConfig& config) {
    const int sub_depth = subgroup_tree.depth();
    if (sub_depth > config.max_depth) {
        throw std::invalid_argument("subgroup tree deeper than the fitting budget");
    }
    StratificationTree skeleton = subgroup_tree;
    skeleton.canonicalize();
    StratificationTree out = skeleton;
    out.set_max_depth(config.max_depth);

    const auto strata = stratum_indices(skeleton, pilot);
    const auto num_cells = static_cast<std::size_t>(skeleton.leaf_count());

    // locate the node of `out` sitting at the g-th skeleton leaf; grafting
    // replaces leaves only, so the top levels of `out` keep mirroring the
    // skeleton and a parallel walk stays valid across iterations
    std::function<int(int, int, int)> locate = [&](int o_idx, int s_idx, int target) -> int {
        const auto& sn = skeleton.nodes()[static_cast<std::size_t>(s_idx)];
        if (sn.is_leaf()) return sn.label == target ? o_idx : -1;
        const auto& on = out.nodes()[static_cast<std::size_t>(o_idx)];
        const int l = locate(on.left, sn.left, target);
        if (l >= 0) return l;
        return locate(on.right, sn.right, target);
    };

    for (std::size_t g = 0; g < num_cells; ++g) {
        std::vector<std::size_t> idxs;
        for (std::size_t i = 0; i < pilot.size(); ++i) {
            if (static_cast<std::size_t>(strata[i]) == g) idxs.push_back(i);
        }
        Sample sub;
        try {
            sub = pilot.subset(idxs);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("subgroup " + std::to_string(g + 1) +
                                     " is missing a treatment arm in the pilot");
        }
        if (sub.empty() || sub.num_arms() < 2) {
            throw std::runtime_error("subgroup " + std::to_string(g + 1) +
                                     " is missing a treatment arm in the pilot");
        }
        FitConfig sub_config = config;
        sub_config.max_depth = config.max_depth - sub_depth;
        sub_config.ea.seed = derive_seed(config.ea.seed, 0x50B6u, g);
        auto fitted = fit(sub, sub_config);

        const int at = locate(out.root(), skeleton.root(), static_cast<int>(g) + 1);
        out.graft(at, fitted.tree, fitted.tree.root());
    }
    out.canonicalize();
    optimize_leaf_proportions_inplace(out, pilot, stratum_indices(out, pilot), config);
    return out;
}

}  // namespace strattree
