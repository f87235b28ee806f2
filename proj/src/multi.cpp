#include "strattree/multi.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "strattree/estimate.hpp"
#include "strattree/objective.hpp"

namespace strattree {

double largest_eigenvalue(std::vector<double> a, int n) {
    if (n <= 0) throw std::invalid_argument("largest_eigenvalue needs n >= 1");
    if (n == 1) return a[0];
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, scale = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                scale += at(i, j) * at(i, j);
                if (i < j) off += at(i, j) * at(i, j);
            }
        }
        if (off <= 1e-30 * std::max(1.0, scale)) break;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double tau = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(tau * tau + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = at(p, i), aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    double best = at(0, 0);
    for (int i = 1; i < n; ++i) best = std::max(best, at(i, i));
    return best;
}

double e_optimal_objective(const VarianceMatrix& v) {
    if (v.dim < 1) throw std::invalid_argument("variance matrix is empty");
    if (v.infinite) return kInfiniteObjective;
    double scale = 0.0;
    for (double x : v.data) scale = std::max(scale, std::fabs(x));
    for (int i = 0; i < v.dim; ++i) {
        for (int j = i + 1; j < v.dim; ++j) {
            if (std::fabs(v.at(i, j) - v.at(j, i)) > 1e-10 * std::max(1.0, scale)) {
                throw std::invalid_argument("variance matrix is not symmetric");
            }
        }
    }
    return largest_eigenvalue(v.data, v.dim);
}

VarianceMatrix empirical_variance_matrix(const Sample& pilot, const std::vector<int>& strata,
                                         const StratificationTree& tree, const FitConfig& config) {
    const int J = pilot.num_treatments();
    if (J < 1) {
        throw std::invalid_argument("pilot sample has no treated arm");
    }
    const auto K = static_cast<std::size_t>(tree.leaf_count());
    const auto moments = compute_moments(pilot, strata, K, J + 1);
    const double m = static_cast<double>(pilot.size());

    // overall contrasts of arm means vs control, accumulated in stratum order
    std::vector<double> sum(static_cast<std::size_t>(J) + 1, 0.0);
    std::vector<std::size_t> cnt(static_cast<std::size_t>(J) + 1, 0);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
            const auto& c = moments.cells[k][a];
            sum[a] += c.mean * static_cast<double>(c.count);
            cnt[a] += c.count;
        }
    }
    std::vector<double> theta(static_cast<std::size_t>(J), 0.0);
    const double mean0 = sum[0] / static_cast<double>(cnt[0]);
    for (std::size_t a = 1; a <= static_cast<std::size_t>(J); ++a) {
        theta[a - 1] = sum[a] / static_cast<double>(cnt[a]) - mean0;
    }

    VarianceMatrix v(J);
    const auto leaves = tree.leaves_in_label_order();
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
            if (moments.cells[k][a].count < static_cast<std::size_t>(config.min_cell_per_arm)) {
                v.infinite = true;
                return v;
            }
        }
        std::size_t nk = 0;
        for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
            nk += moments.cells[k][a].count;
        }
        const double share = static_cast<double>(nk) / m;
        const auto& pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi;
        if (static_cast<int>(pi.size()) != J) {
            throw std::invalid_argument("leaf targets must have one entry per treated arm");
        }
        double acc = 0.0;
        for (double p : pi) acc += p;
        const double pi0 = 1.0 - acc;
        const double var0 = moments.cells[k][0].var;
        for (int i = 0; i < J; ++i) {
            const double bi = moments.cells[k][static_cast<std::size_t>(i) + 1].mean -
                              moments.cells[k][0].mean;
            for (int j = 0; j < J; ++j) {
                const double bj = moments.cells[k][static_cast<std::size_t>(j) + 1].mean -
                                  moments.cells[k][0].mean;
                double contrib = (bi - theta[static_cast<std::size_t>(i)]) *
                                     (bj - theta[static_cast<std::size_t>(j)]) +
                                 var0 / pi0;
                if (i == j) {
                    contrib += moments.cells[k][static_cast<std::size_t>(i) + 1].var /
                               pi[static_cast<std::size_t>(i)];
                }
                v.at(i, j) += share * contrib;
            }
        }
    }
    return v;
}

VarianceMatrix empirical_variance_matrix(const StratificationTree& tree, const Sample& pilot,
                                         const FitConfig& config) {
    return empirical_variance_matrix(pilot, stratum_indices(tree, pilot), tree, config);
}

namespace {

// allocation objective: largest eigenvalue of the stratum matrix at p
double allocation_value(const std::vector<double>& p, const std::vector<double>& var,
                        const std::vector<double>& outer) {
    const int J = static_cast<int>(var.size()) - 1;
    std::vector<double> m(static_cast<std::size_t>(J) * J, 0.0);
    const double base = var[0] / p[0];
    for (int i = 0; i < J; ++i) {
        for (int j = 0; j < J; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * J + j;
            m[idx] = (outer.empty() ? 0.0 : outer[idx]) + base;
            if (i == j) m[idx] += var[static_cast<std::size_t>(i) + 1] / p[static_cast<std::size_t>(i) + 1];
        }
    }
    return largest_eigenvalue(std::move(m), J);
}

}  // namespace

std::vector<double> optimize_stratum_allocation(const std::vector<double>& var,
                                                const std::vector<double>& outer, double nu,
                                                double tolerance) {
    const int J = static_cast<int>(var.size()) - 1;
    if (J < 1) throw std::invalid_argument("allocation needs at least one treated arm");
    if (!outer.empty() && outer.size() != static_cast<std::size_t>(J) * J) {
        throw std::invalid_argument("outer term must be J x J");
    }
    if (static_cast<double>(J + 1) * nu > 1.0) {
        throw std::invalid_argument("clipped simplex is empty: (J + 1) * nu > 1");
    }
    if (J == 1) {
        // the matrix is 1x1 and the minimizer is the scalar Neyman share
        return {neyman_allocation(std::sqrt(var[1]), std::sqrt(var[0]), nu)};
    }

    std::vector<double> p(static_cast<std::size_t>(J) + 1,
                          1.0 / static_cast<double>(J + 1));
    double value = allocation_value(p, var, outer);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;

    for (int sweep = 0; sweep < 200; ++sweep) {
        const double start = value;
        for (std::size_t a = 0; a + 1 <= static_cast<std::size_t>(J); ++a) {
            for (std::size_t b = a + 1; b <= static_cast<std::size_t>(J); ++b) {
                // move t from component b to component a
                double lo = -(p[a] - nu), hi = p[b] - nu;
                if (hi - lo <= 0.0) continue;
                auto f = [&](double t) {
                    std::vector<double> q = p;
                    q[a] += t;
                    q[b] -= t;
                    return allocation_value(q, var, outer);
                };
                // golden-section on the convex section
                double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
                double f1 = f(x1), f2 = f(x2);
                while (hi - lo > 1e-10) {
                    if (f1 <= f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - gr * (hi - lo);
                        f1 = f(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + gr * (hi - lo);
                        f2 = f(x2);
                    }
                }
                const double t = 0.5 * (lo + hi);
                const double ft = f(t);
                if (ft < value) {
                    p[a] += t;
                    p[b] -= t;
                    value = ft;
                }
            }
        }
        if (start - value <= tolerance * std::max(1.0, std::fabs(start))) break;
    }
    return {p.begin() + 1, p.end()};
}

FitConfig with_multi_objective(FitConfig config) {
    config.objective_hook = [](const Sample& pilot, const std::vector<int>& strata,
                               const StratificationTree& tree, const FitConfig& cfg) {
        return e_optimal_objective(empirical_variance_matrix(pilot, strata, tree, cfg));
    };
    config.proportions_hook = [](StratificationTree& tree, const Sample& pilot,
                                 const std::vector<int>& strata, const FitConfig& cfg) {
        const int J = pilot.num_treatments();
        if (J < 1) throw std::invalid_argument("pilot sample has no treated arm");
        const auto K = static_cast<std::size_t>(tree.leaf_count());
        const auto moments = compute_moments(pilot, strata, K, J + 1);

        std::vector<double> sum(static_cast<std::size_t>(J) + 1, 0.0);
        std::vector<std::size_t> cnt(static_cast<std::size_t>(J) + 1, 0);
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
                sum[a] += moments.cells[k][a].mean * static_cast<double>(moments.cells[k][a].count);
                cnt[a] += moments.cells[k][a].count;
            }
        }
        std::vector<double> theta(static_cast<std::size_t>(J), 0.0);
        if (cnt[0] > 0) {
            const double mean0 = sum[0] / static_cast<double>(cnt[0]);
            for (std::size_t a = 1; a <= static_cast<std::size_t>(J); ++a) {
                if (cnt[a] > 0) theta[a - 1] = sum[a] / static_cast<double>(cnt[a]) - mean0;
            }
        }

        const auto leaves = tree.leaves_in_label_order();
        for (std::size_t k = 0; k < K; ++k) {
            bool complete = true;
            for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
                if (moments.cells[k][a].count == 0) complete = false;
            }
            std::vector<double> pi;
            if (!complete) {
                pi.assign(static_cast<std::size_t>(J), 1.0 / static_cast<double>(J + 1));
            } else {
                std::vector<double> var(static_cast<std::size_t>(J) + 1);
                for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
                    var[a] = moments.cells[k][a].var;
                }
                std::vector<double> outer(static_cast<std::size_t>(J) * J);
                for (int i = 0; i < J; ++i) {
                    const double bi = moments.cells[k][static_cast<std::size_t>(i) + 1].mean -
                                      moments.cells[k][0].mean;
                    for (int j = 0; j < J; ++j) {
                        const double bj = moments.cells[k][static_cast<std::size_t>(j) + 1].mean -
                                          moments.cells[k][0].mean;
                        outer[static_cast<std::size_t>(i) * J + j] =
                            (bi - theta[static_cast<std::size_t>(i)]) *
                            (bj - theta[static_cast<std::size_t>(j)]);
                    }
                }
                pi = optimize_stratum_allocation(var, outer, cfg.nu);
            }
            tree.nodes()[static_cast<std::size_t>(leaves[k])].pi = std::move(pi);
        }
    };
    return config;
}

MultiEstimateResult estimate_ate_multi(const StratificationTree& tree, const Sample& wave2,
                                       double level) {
    const int J = wave2.num_treatments();
    if (J < 1) throw std::invalid_argument("sample has no treated arm");
    if (wave2.empty()) throw std::invalid_argument("empty sample");

    const auto moments = compute_moments(tree, wave2);
    const auto K = moments.cells.size();
    const double n = static_cast<double>(wave2.size());

    std::string offenders;
    for (std::size_t k = 0; k < K; ++k) {
        if (moments.stratum_size(k) == 0) continue;
        for (std::size_t a = 0; a <= static_cast<std::size_t>(J); ++a) {
            if (moments.cells[k][a].count == 0) {
                if (!offenders.empty()) offenders += ", ";
                offenders += std::to_string(k + 1);
                break;
            }
        }
    }
    if (!offenders.empty()) {
        throw std::runtime_error("strata with an empty treatment arm: {" + offenders +
                                 "}; cannot estimate within-stratum contrasts");
    }

    MultiEstimateResult r;
    r.level = level;
    r.n = wave2.size();
    r.theta_hat.assign(static_cast<std::size_t>(J), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double nk = static_cast<double>(moments.stratum_size(k));
        if (nk == 0.0) continue;
        for (int a = 1; a <= J; ++a) {
            const double beta = moments.cells[k][static_cast<std::size_t>(a)].mean -
                                moments.cells[k][0].mean;
            r.theta_hat[static_cast<std::size_t>(a) - 1] += (nk / n) * beta;
        }
    }

    r.v_hat = VarianceMatrix(J);
    for (std::size_t k = 0; k < K; ++k) {
        const double nk = static_cast<double>(moments.stratum_size(k));
        if (nk == 0.0) continue;
        const double share = nk / n;
        // realized arm shares stand in for the assignment targets
        const double p0 = static_cast<double>(moments.cells[k][0].count) / nk;
        const double var0 = moments.cells[k][0].var;
        for (int i = 0; i < J; ++i) {
            const double bi = moments.cells[k][static_cast<std::size_t>(i) + 1].mean -
                              moments.cells[k][0].mean;
            for (int j = 0; j < J; ++j) {
                const double bj = moments.cells[k][static_cast<std::size_t>(j) + 1].mean -
                                  moments.cells[k][0].mean;
                double contrib = (bi - r.theta_hat[static_cast<std::size_t>(i)]) *
                                     (bj - r.theta_hat[static_cast<std::size_t>(j)]) +
                                 var0 / p0;
                if (i == j) {
                    const auto& c = moments.cells[k][static_cast<std::size_t>(i) + 1];
                    contrib += c.var / (static_cast<double>(c.count) / nk);
                }
                r.v_hat.at(i, j) += share * contrib;
            }
        }
    }

    const double z = normal_quantile(0.5 + level / 2.0);
    r.ci_low.resize(static_cast<std::size_t>(J));
    r.ci_high.resize(static_cast<std::size_t>(J));
    for (int a = 0; a < J; ++a) {
        const double half = z * std::sqrt(r.v_hat.at(a, a) / n);
        r.ci_low[static_cast<std::size_t>(a)] = r.theta_hat[static_cast<std::size_t>(a)] - half;
        r.ci_high[static_cast<std::size_t>(a)] = r.theta_hat[static_cast<std::size_t>(a)] + half;
    }
    return r;
}

}  // namespace strattree
