#include "strattree/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "strattree/assign.hpp"
#include "strattree/cv.hpp"
#include "strattree/estimate.hpp"
#include "strattree/rng.hpp"
#include "strattree/search.hpp"

namespace strattree {

CovariateSpace DgpSpec::space() const { return CovariateSpace::unit_cube(d); }

namespace {

double step(double x, double thr) { return x > thr ? 1.0 : 0.0; }

}  // namespace

DgpSpec DgpSpec::model1() {
    DgpSpec s;
    s.model = 1;
    s.d = 2;
    s.noise_sd = std::sqrt(0.1);
    s.true_ate = 277.0 / 2240.0;  // exact mean treatment effect
    s.kappa0 = [](const std::vector<double>&) { return 0.2; };
    s.nu0 = [](const std::vector<double>&) { return 5.0; };
    s.kappa1 = [](const std::vector<double>& x) {
        return 10.0 * x[0] * step(x[0], 0.5) - 5.0 * x[1] * step(x[1], 0.5);
    };
    s.nu1 = [](const std::vector<double>& x) {
        return 1.0 + 10.0 * x[0] * step(x[0], 0.6) + 5.0 * x[1] * step(x[1], 0.6);
    };
    return s;
}

DgpSpec DgpSpec::model2() {
    DgpSpec s;
    s.model = 2;
    s.d = 10;
    s.noise_sd = std::sqrt(0.1);
    s.true_ate = 0.08847402591517857;  // exact mean treatment effect
    s.kappa0 = [](const std::vector<double>&) { return 0.5; };
    s.nu0 = [](const std::vector<double>&) { return 5.0; };
    s.kappa1 = [](const std::vector<double>& x) {
        double v = 0.0;
        double w = 10.0;  // 10^{-j+2} for j = 1..10
        double sign = 1.0;
        for (std::size_t j = 0; j < 10; ++j) {
            v += sign * w * x[j] * step(x[j], 0.5);
            w /= 10.0;
            sign = -sign;
        }
        return v;
    };
    s.nu1 = [](const std::vector<double>& x) {
        double v = 1.0;
        double w = 10.0;
        for (std::size_t j = 0; j < 10; ++j) {
            v += w * step(x[j], 0.6);
            w /= 10.0;
        }
        return v;
    };
    return s;
}

DgpSpec DgpSpec::model3() {
    DgpSpec s;
    s.model = 3;
    s.d = 10;
    s.noise_sd = std::sqrt(0.1);
    s.true_ate = 277.0 / 2240.0;  // exact mean treatment effect
    s.kappa0 = [](const std::vector<double>&) { return 0.2; };
    s.nu0 = [](const std::vector<double>&) { return 9.0; };
    s.kappa1 = [](const std::vector<double>& x) {
        double v = 0.0;
        double sign = 1.0;
        for (std::size_t j = 0; j < 10; ++j) {
            v += sign * (j < 3 ? 10.0 : 5.0) * x[j] * step(x[j], 0.5);
            sign = -sign;
        }
        return v;
    };
    s.nu1 = [](const std::vector<double>& x) {
        double v = 1.0;
        for (std::size_t j = 0; j < 10; ++j) {
            v += (j < 3 ? 10.0 : 5.0) * step(x[j], 0.6);
        }
        return v;
    };
    return s;
}

DgpSpec DgpSpec::by_id(int model) {
    switch (model) {
        case 1: return model1();
        case 2: return model2();
        case 3: return model3();
        default: throw std::invalid_argument("unknown model " + std::to_string(model));
    }
}

PotentialTable draw(const DgpSpec& dgp, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("draw needs n >= 1");
    Rng rng(derive_seed(seed, 0xD6A0u));
    PotentialTable t;
    t.y0.reserve(n);
    t.y1.reserve(n);
    t.x.reserve(n);
    std::vector<double> x(dgp.d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dgp.d; ++j) x[j] = rng.beta(2.0, 5.0);
        const double e0 = rng.normal();
        const double e1 = rng.normal();
        t.y0.push_back(dgp.kappa0(x) + dgp.nu0(x) * dgp.noise_sd * e0);
        t.y1.push_back(dgp.kappa1(x) + dgp.nu1(x) * dgp.noise_sd * e1);
        t.x.push_back(x);
    }
    return t;
}

Sample observe(const PotentialTable& draws, const std::vector<int>& treatments,
               const CovariateSpace& space) {
    if (treatments.size() != draws.size()) {
        throw std::invalid_argument("treatments must match the number of draws");
    }
    std::vector<SampleRow> rows;
    rows.reserve(draws.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const int a = treatments[i];
        if (a != 0 && a != 1) throw std::invalid_argument("two-arm table: treatment must be 0 or 1");
        rows.push_back({a == 1 ? draws.y1[i] : draws.y0[i], a, draws.x[i]});
    }
    return Sample(std::move(rows), space);
}

StratificationTree make_adhoc_tree(const CovariateSpace& space, int depth, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0xADF0u));
    auto t = StratificationTree::single_leaf(space, depth);
    for (int level = 0; level < depth; ++level) {
        const int dim = static_cast<int>(rng.uniform_index(space.num_dims()));
        std::vector<int> leaves;
        for (std::size_t i = 0; i < t.nodes().size(); ++i) {
            if (t.nodes()[i].is_leaf()) leaves.push_back(static_cast<int>(i));
        }
        for (int leaf : leaves) {
            const auto cell = t.cell_of(leaf);
            const auto j = static_cast<std::size_t>(dim);
            t.split_leaf(leaf, Cut{dim, 0.5 * (cell.lo[j] + cell.hi[j])});
        }
    }
    t.canonicalize();
    for (auto& n : t.nodes()) {
        if (n.is_leaf()) n.pi = {0.5};
    }
    return t;
}

namespace {

// builds a depth-3 fixture: cuts[0] root, cuts[1..2] level 2, cuts[3..6]
// level 3 (left to right); pis left to right
StratificationTree fixture_tree(const CovariateSpace& space, const std::vector<Cut>& cuts,
                                const std::vector<double>& pis) {
    auto t = StratificationTree::single_leaf(space, 3);
    t.split_leaf(0, cuts[0]);
    const int l = t.nodes()[0].left, r = t.nodes()[0].right;
    t.split_leaf(l, cuts[1]);
    t.split_leaf(r, cuts[2]);
    const int ll = t.nodes()[static_cast<std::size_t>(l)].left;
    const int lr = t.nodes()[static_cast<std::size_t>(l)].right;
    const int rl = t.nodes()[static_cast<std::size_t>(r)].left;
    const int rr = t.nodes()[static_cast<std::size_t>(r)].right;
    t.split_leaf(ll, cuts[3]);
    t.split_leaf(lr, cuts[4]);
    t.split_leaf(rl, cuts[5]);
    t.split_leaf(rr, cuts[6]);
    t.canonicalize();
    const auto leaves = t.leaves_in_label_order();
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        t.nodes()[static_cast<std::size_t>(leaves[k])].pi = {pis[k]};
    }
    return t;
}

}  // namespace

StratificationTree infeasible_tree(int model) {
    switch (model) {
        case 1:
            return fixture_tree(CovariateSpace::unit_cube(2),
                                {{1, 0.4},
                                 {0, 0.48},
                                 {0, 0.4},
                                 {0, 0.4},
                                 {0, 0.59},
                                 {1, 0.55},
                                 {0, 0.56}},
                                {0.17, 0.19, 0.22, 0.54, 0.19, 0.39, 0.36, 0.49});
        case 2:
            return fixture_tree(CovariateSpace::unit_cube(10),
                                {{0, 0.49},
                                 {0, 0.4},
                                 {0, 0.6},
                                 {1, 0.43},
                                 {0, 0.44},
                                 {0, 0.53},
                                 {0, 0.76}},
                                {0.17, 0.19, 0.19, 0.19, 0.18, 0.21, 0.53, 0.60});
        case 3:
            return fixture_tree(CovariateSpace::unit_cube(10),
                                {{0, 0.4},
                                 {1, 0.4},
                                 {1, 0.4},
                                 {2, 0.4},
                                 {2, 0.4},
                                 {2, 0.4},
                                 {2, 0.4}},
                                {0.39, 0.44, 0.43, 0.48, 0.43, 0.47, 0.48, 0.49});
        default:
            throw std::invalid_argument("no published tree for model " + std::to_string(model));
    }
}

double population_variance(const DgpSpec& dgp, const StratificationTree& tree, std::size_t n_mc,
                           std::uint64_t seed) {
    return population_variance(tree, draw(dgp, n_mc, derive_seed(seed, 0xB0B0u)));
}

namespace {

enum class Method { None, Adhoc, Strat, Cv, Infeasible };

Method parse_method(const std::string& name) {
    if (name == "none") return Method::None;
    if (name == "adhoc") return Method::Adhoc;
    if (name == "strat_tree") return Method::Strat;
    if (name == "cv_tree") return Method::Cv;
    if (name == "infeasible") return Method::Infeasible;
    throw std::invalid_argument("unknown method '" + name + "'");
}

struct RepCell {
    bool covered = false;
    bool rejected = false;
    double length = 0.0;
    double error = 0.0;  // theta_hat - true ATE
};

}  // namespace

std::vector<MetricsRow> run_study(const DgpSpec& dgp, const std::vector<std::string>& methods,
                                  const StudyConfig& config) {
    if (config.reps < 1) throw std::invalid_argument("reps must be >= 1");
    if (methods.empty()) throw std::invalid_argument("no methods given");
    std::vector<Method> parsed;
    for (const auto& m : methods) parsed.push_back(parse_method(m));

    const auto space = dgp.space();
    const double z_test = normal_quantile(0.975);  // 5% two-sided t-test of ATE = 0

    std::vector<std::vector<RepCell>> cells(static_cast<std::size_t>(config.reps),
                                            std::vector<RepCell>(parsed.size()));

    auto run_rep = [&](int rep) {
        const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(rep) + 1);

        const auto pilot_draws = draw(dgp, config.pilot_n, derive_seed(rep_seed, 1));
        auto pilot_tree = StratificationTree::single_leaf(space, 0);
        const auto pilot_plan = assign_simple(pilot_tree, pilot_draws.x, derive_seed(rep_seed, 2));
        const auto pilot = observe(pilot_draws, pilot_plan.treatments, space);
        const auto pilot_est = estimate_ate(pilot_tree, pilot, config.level);

        const auto main_draws = draw(dgp, config.main_n, derive_seed(rep_seed, 3));

        for (std::size_t mi = 0; mi < parsed.size(); ++mi) {
            StratificationTree tree;
            FitConfig fc = config.fit;
            fc.ea.seed = derive_seed(rep_seed, 10 + mi);
            switch (parsed[mi]) {
                case Method::None:
                    // unstratified half-half assignment
                    tree = StratificationTree::single_leaf(space, 0);
                    break;
                case Method::Adhoc:
                    tree = make_adhoc_tree(space, config.fit.max_depth, derive_seed(rep_seed, 10 + mi));
                    break;
                case Method::Strat:
                    tree = fit(pilot, fc).tree;
                    break;
                case Method::Cv:
                    tree = cv_fit(pilot, config.fit.max_depth, fc).tree;
                    break;
                case Method::Infeasible:
                    tree = infeasible_tree(dgp.model);
                    break;
            }

            const auto plan = assign_sbr(tree, main_draws.x, derive_seed(rep_seed, 100 + mi));
            const auto wave2 = observe(main_draws, plan.treatments, space);
            const auto est = estimate_ate(tree, wave2, config.level, /*drop_empty_arms=*/true);
            const auto pooled = estimate_pooled(pilot_est, est);

            RepCell& cell = cells[static_cast<std::size_t>(rep)][mi];
            cell.covered = pooled.ci_low <= dgp.true_ate && dgp.true_ate <= pooled.ci_high;
            cell.length = pooled.ci_high - pooled.ci_low;
            cell.rejected = std::fabs(pooled.theta_hat) / pooled.se() > z_test;
            cell.error = pooled.theta_hat - dgp.true_ate;
        }
    };

    unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(config.reps));
    if (threads <= 1) {
        for (int rep = 0; rep < config.reps; ++rep) run_rep(rep);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&]() {
                for (int rep = next.fetch_add(1); rep < config.reps; rep = next.fetch_add(1)) {
                    run_rep(rep);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    // serial aggregation in rep order keeps results thread-count independent
    const double reps = static_cast<double>(config.reps);
    std::vector<MetricsRow> rows(parsed.size());
    int none_at = -1;
    for (std::size_t mi = 0; mi < parsed.size(); ++mi) {
        MetricsRow& row = rows[mi];
        row.method = methods[mi];
        row.reps = config.reps;
        std::size_t covered = 0, rejected = 0;
        double len_sum = 0.0, len_c = 0.0;
        double sq_sum = 0.0, sq_c = 0.0;
        double sq4_sum = 0.0, sq4_c = 0.0;  // for the MC se of the MSE
        auto kahan = [](double& sum, double& comp, double v) {
            const double y = v - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        };
        for (int rep = 0; rep < config.reps; ++rep) {
            const RepCell& cell = cells[static_cast<std::size_t>(rep)][mi];
            covered += cell.covered ? 1 : 0;
            rejected += cell.rejected ? 1 : 0;
            kahan(len_sum, len_c, cell.length);
            const double sq = cell.error * cell.error;
            kahan(sq_sum, sq_c, sq);
            kahan(sq4_sum, sq4_c, sq * sq);
        }
        const double pc = static_cast<double>(covered) / reps;
        const double pr = static_cast<double>(rejected) / reps;
        row.coverage = 100.0 * pc;
        row.power = 100.0 * pr;
        row.avg_length = len_sum / reps;
        const double mse = sq_sum / reps;
        row.rmse = std::sqrt(mse);
        row.coverage_se = 100.0 * std::sqrt(pc * (1.0 - pc) / reps);
        row.power_se = 100.0 * std::sqrt(pr * (1.0 - pr) / reps);
        const double var_sq = std::max(0.0, sq4_sum / reps - mse * mse);
        row.rmse_se = row.rmse > 0.0 ? std::sqrt(var_sq / reps) / (2.0 * row.rmse) : 0.0;
        if (parsed[mi] == Method::None) none_at = static_cast<int>(mi);
    }
    if (none_at >= 0) {
        const MetricsRow& base = rows[static_cast<std::size_t>(none_at)];
        for (auto& row : rows) {
            if (base.avg_length > 0.0) {
                row.delta_length = 100.0 * (row.avg_length / base.avg_length - 1.0);
            }
            if (base.rmse > 0.0) row.delta_rmse = 100.0 * (row.rmse / base.rmse - 1.0);
        }
    }
    return rows;
}

std::string format_metrics(const std::vector<MetricsRow>& rows) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %9s %9s %9s %9s %9s %6s\n", "method", "coverage",
                  "dLength%", "power", "dRMSE%", "rmse", "reps");
    out += buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-12s %9.1f %9.1f %9.1f %9.1f %9.4f %6d\n",
                      r.method.c_str(), r.coverage, r.delta_length, r.power, r.delta_rmse, r.rmse,
                      r.reps);
        out += buf;
    }
    return out;
}

}  // namespace strattree
