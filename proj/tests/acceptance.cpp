// End-to-end acceptance checks. Each criterion prints exactly one
// PASS/FAIL line; the exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "strattree/assign.hpp"
#include "strattree/cv.hpp"
#include "strattree/estimate.hpp"
#include "strattree/multi.hpp"
#include "strattree/search.hpp"
#include "strattree/sim.hpp"

using namespace strattree;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
    std::printf("criterion %2d: %s — %s (%s)\n", criterion, pass ? "PASS" : "FAIL", what.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) failures++;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------- 1
void criterion_sbr_floor() {
    Rng rng(1001);
    std::size_t triples = 0, violations = 0;
    while (triples < 10000) {
        auto tree = test_helpers::random_tree(2, 3, rng);
        const std::size_t n = 20 + rng.uniform_index(180);
        std::vector<std::vector<double>> xs(n, std::vector<double>(2));
        for (auto& x : xs) {
            x[0] = rng.uniform();
            x[1] = rng.uniform();
        }
        const auto plan = assign_sbr(tree, xs, rng.next());
        triples++;

        const auto leaves = tree.leaves_in_label_order();
        std::vector<std::size_t> nk(leaves.size(), 0), n1k(leaves.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(plan.strata[i] - 1);
            nk[k]++;
            n1k[k] += plan.treatments[i] == 1 ? 1 : 0;
        }
        for (std::size_t k = 0; k < leaves.size(); ++k) {
            const double pi = tree.nodes()[static_cast<std::size_t>(leaves[k])].pi[0];
            const auto want = static_cast<std::size_t>(std::floor(static_cast<double>(nk[k]) * pi));
            const double dev = std::fabs(static_cast<double>(n1k[k]) / static_cast<double>(n) -
                                         pi * static_cast<double>(nk[k]) / static_cast<double>(n));
            if (n1k[k] != want || dev > 1.0 / static_cast<double>(n) + 1e-12) violations++;
        }
    }
    report(1, violations == 0, "SBR floor identity on 10^4 random triples",
           fmt("%zu stratum violations", violations));
}

// ---------------------------------------------------------------- 2
Sample oracle_pilot(std::size_t d, std::size_t m, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SampleRow> rows(m);
    for (std::size_t i = 0; i < m; ++i) {
        rows[i].x.resize(d);
        for (auto& x : rows[i].x) x = rng.uniform();
        rows[i].a = (i < 2) ? static_cast<int>(i) : static_cast<int>(rng.coin());
        const double lift = rows[i].x[0] > 0.45 ? 2.0 : 0.0;
        rows[i].y = rng.normal(lift * rows[i].a, 1.0 + lift);
    }
    return Sample(std::move(rows), CovariateSpace::unit_cube(d));
}

void criterion_oracle_equivalence() {
    int runs = 0, hits = 0;
    bool monotone = true;
    for (int t = 0; t < 20; ++t) {
        const std::size_t d = t % 2 == 0 ? 1 : 2;
        const std::size_t m = 80 + 10 * static_cast<std::size_t>(t % 12);
        auto pilot = oracle_pilot(d, m, 2000 + static_cast<std::uint64_t>(t));
        FitConfig config;
        config.max_depth = 2;
        config.ea.population = 100;
        config.ea.seed = static_cast<std::uint64_t>(t);
        config.split_grid.assign(d, {0.15, 0.3, 0.45, 0.6, 0.75, 0.9});
        const auto grid = build_split_grid(pilot, config);

        double prev = kInfiniteObjective;
        double best2 = kInfiniteObjective;
        for (int L = 0; L <= 2; ++L) {
            const auto r = exhaustive_search(pilot, L, grid, config);
            if (r.objective > prev + 1e-12) monotone = false;
            prev = r.objective;
            if (L == 2) best2 = r.objective;
        }
        const auto ea = fit(pilot, config);
        runs++;
        if (std::fabs(ea.objective - best2) <= 1e-9) hits++;
    }
    const bool pass = hits >= (runs * 95 + 99) / 100 && monotone;
    report(2, pass, "evolutionary search equals the exhaustive oracle",
           fmt("%d/%d optima matched within 1e-9, depth minima monotone: %s", hits, runs,
               monotone ? "yes" : "no"));
}

// ---------------------------------------------------------------- 3
struct Brute {
    double theta = 0.0, v_h = 0.0, v_y = 0.0;
};

Brute brute_force(const std::vector<SampleRow>& rows, int K,
                  const std::function<int(const std::vector<double>&)>& stratum) {
    std::vector<std::vector<double>> y0(static_cast<std::size_t>(K)),
        y1(static_cast<std::size_t>(K));
    for (const auto& r : rows) {
        const auto k = static_cast<std::size_t>(stratum(r.x) - 1);
        (r.a == 1 ? y1 : y0)[k].push_back(r.y);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto var = [&](const std::vector<double>& v) {
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s / static_cast<double>(v.size());
    };
    Brute o;
    const double n = static_cast<double>(rows.size());
    for (int k = 0; k < K; ++k) {
        const auto u = static_cast<std::size_t>(k);
        o.theta += (static_cast<double>(y0[u].size() + y1[u].size()) / n) *
                   (mean(y1[u]) - mean(y0[u]));
    }
    for (int k = 0; k < K; ++k) {
        const auto u = static_cast<std::size_t>(k);
        const double share = static_cast<double>(y0[u].size() + y1[u].size()) / n;
        const double beta = mean(y1[u]) - mean(y0[u]);
        o.v_h += share * (beta - o.theta) * (beta - o.theta);
        o.v_y += n * share * share *
                 (var(y1[u]) / static_cast<double>(y1[u].size()) +
                  var(y0[u]) / static_cast<double>(y0[u].size()));
    }
    return o;
}

void criterion_estimator_oracle() {
    double worst = 0.0;
    auto check = [&](const StratificationTree& tree, const std::vector<SampleRow>& rows, int K,
                     const std::function<int(const std::vector<double>&)>& stratum) {
        Sample s(rows, tree.space());
        const auto r = estimate_ate(tree, s);
        const auto o = brute_force(rows, K, stratum);
        worst = std::max(worst, std::fabs(r.theta_hat - o.theta));
        worst = std::max(worst, std::fabs(r.v_h - o.v_h));
        worst = std::max(worst, std::fabs(r.v_y - o.v_y));
    };
    auto rows_for = [](std::size_t n, std::size_t d, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<SampleRow> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i].x.resize(d);
            for (auto& x : rows[i].x) x = rng.uniform();
            rows[i].a = (i < 2) ? static_cast<int>(i) : static_cast<int>(rng.coin());
            rows[i].y = rng.normal(1.0 + rows[i].x[0], 1.0 + static_cast<double>(rows[i].a));
        }
        return rows;
    };
    check(StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 0), rows_for(101, 1, 31),
          1, [](const std::vector<double>&) { return 1; });
    {
        auto t = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 1);
        t.split_leaf(0, Cut{0, 0.5});
        t.canonicalize();
        check(t, rows_for(240, 1, 32), 2,
              [](const std::vector<double>& x) { return x[0] <= 0.5 ? 1 : 2; });
    }
    check(test_helpers::depth2_tree(), rows_for(600, 2, 33), 4,
          [](const std::vector<double>& x) {
              if (x[0] <= 0.5) return x[1] <= 0.5 ? 1 : 2;
              return x[1] <= 0.7 ? 3 : 4;
          });
    report(3, worst <= 1e-12, "estimator matches a brute-force oracle on K = 1, 2, 4",
           fmt("max |difference| = %.2e", worst));
}

// ---------------------------------------------------------------- 4
void criterion_ate_ground_truth() {
    const double published[] = {0.1257, 0.0862, 0.121};
    bool pass = true;
    std::string detail;
    for (int model = 1; model <= 3; ++model) {
        const auto dgp = DgpSpec::by_id(model);
        const auto t = draw(dgp, 1000000, 4000 + static_cast<std::uint64_t>(model));
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double d = t.y1[i] - t.y0[i];
            sum += d;
            sq += d * d;
        }
        const double n = static_cast<double>(t.size());
        const double mean = sum / n;
        const double se = std::sqrt((sq / n - mean * mean) / n);
        const double diff = std::fabs(mean - published[model - 1]);
        if (diff > 3.0 * se) pass = false;
        detail += fmt("M%d %.4f vs %.4f (3se %.4f) ", model, mean, published[model - 1],
                      3.0 * se);
    }
    report(4, pass, "mean treatment effects match the published values", detail);
}

// ---------------------------------------------------------------- 5
const MetricsRow* find_row(const std::vector<MetricsRow>& rows, const std::string& m) {
    for (const auto& r : rows) {
        if (r.method == m) return &r;
    }
    return nullptr;
}

void criterion_table1() {
    const auto dgp = DgpSpec::model1();
    StudyConfig sc;
    sc.pilot_n = 500;
    sc.main_n = 4500;
    sc.reps = 500;
    sc.seed = 51;
    sc.fit.ea.population = 100;
    const std::vector<std::string> methods = {"none", "adhoc", "strat_tree", "cv_tree",
                                              "infeasible"};
    const auto rows = run_study(dgp, methods, sc);

    bool coverage_ok = true;
    std::string cov_detail;
    for (const auto& r : rows) {
        if (r.coverage < 92.5 || r.coverage > 96.5) coverage_ok = false;
        cov_detail += fmt("%s %.1f ", r.method.c_str(), r.coverage);
    }
    const double strat = find_row(rows, "strat_tree")->delta_rmse;
    const double cv = find_row(rows, "cv_tree")->delta_rmse;
    const double adhoc = find_row(rows, "adhoc")->delta_rmse;
    const bool strat_ok = strat >= -19.0 && strat <= -7.0;
    const bool cv_ok = cv <= adhoc + 4.0;
    report(5, coverage_ok && strat_ok && cv_ok, "scaled benchmark study, 500 reps",
           fmt("coverage %s| dRMSE strat %.1f cv %.1f adhoc %.1f", cov_detail.c_str(), strat, cv,
               adhoc));
}

// ---------------------------------------------------------------- 6
void criterion_overfitting() {
    const auto dgp = DgpSpec::model3();
    StudyConfig sc;
    sc.pilot_n = 100;
    sc.main_n = 4900;
    sc.reps = 300;
    sc.seed = 61;
    sc.fit.ea.population = 100;
    const auto rows = run_study(dgp, {"none", "strat_tree", "cv_tree"}, sc);
    const double strat = find_row(rows, "strat_tree")->delta_rmse;
    const double cv = find_row(rows, "cv_tree")->delta_rmse;
    report(6, cv <= strat - 5.0, "cross-validation protects a tiny pilot from overfitting",
           fmt("dRMSE cv %.1f vs strat %.1f", cv, strat));
}

// ---------------------------------------------------------------- 7
void criterion_bad_tree_coverage() {
    const auto dgp = DgpSpec::model1();
    const auto tree = make_adhoc_tree(dgp.space(), 3, 777);  // fixed arbitrary tree
    int covered = 0;
    const int reps = 1000;
    for (int rep = 0; rep < reps; ++rep) {
        const auto seed = derive_seed(70, static_cast<std::uint64_t>(rep));
        const auto draws = draw(dgp, 2000, seed);
        const auto plan = assign_sbr(tree, draws.x, derive_seed(seed, 1));
        const auto wave = observe(draws, plan.treatments, dgp.space());
        const auto est = estimate_ate(tree, wave, 0.95, /*drop_empty_arms=*/true);
        covered += (est.ci_low <= dgp.true_ate && dgp.true_ate <= est.ci_high) ? 1 : 0;
    }
    const double pct = 100.0 * covered / reps;
    report(7, pct >= 93.0 && pct <= 97.0, "coverage holds under an arbitrary fixed tree",
           fmt("%.1f%% over %d reps", pct, reps));
}

// ---------------------------------------------------------------- 8
void criterion_variance_consistency() {
    const auto dgp = DgpSpec::model1();
    const auto tree = infeasible_tree(1);
    const double pop = population_variance(dgp, tree, 1000000, 80);
    // average a few large-sample draws so the check reflects the mean of
    // the estimator rather than one realization
    double acc = 0.0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
        const auto seed = derive_seed(81, static_cast<std::uint64_t>(rep));
        const auto draws = draw(dgp, 50000, seed);
        const auto plan = assign_sbr(tree, draws.x, derive_seed(seed, 1));
        const auto wave = observe(draws, plan.treatments, dgp.space());
        acc += estimate_ate(tree, wave).v_hat;
    }
    const double mean_v = acc / reps;
    const double rel = std::fabs(mean_v / pop - 1.0);
    report(8, rel <= 0.03, "variance estimator converges to the population value",
           fmt("mean V 50k = %.4f vs population %.4f (%.2f%%)", mean_v, pop, 100.0 * rel));
}

// ---------------------------------------------------------------- 9
void criterion_multi_reduction() {
    Rng rng(909);
    FitConfig config;
    double worst = 0.0;
    int finite = 0, agree_inf = 0, total = 0;
    while (total < 100) {
        auto tree = test_helpers::random_tree(2, 2, rng);
        auto s = test_helpers::random_sample(80 + rng.uniform_index(120), 2, rng);
        total++;
        const double scalar = empirical_variance(tree, s, config);
        const auto matrix = empirical_variance_matrix(tree, s, config);
        if (std::isinf(scalar)) {
            agree_inf += matrix.infinite ? 1 : 0;
            continue;
        }
        finite++;
        worst = std::max(worst, std::fabs(matrix.at(0, 0) - scalar));
    }
    const bool eig = largest_eigenvalue({1.0, 0.0, 0.0, 1.0}, 2) == 1.0 &&
                     largest_eigenvalue({2.0, 0.0, 0.0, 5.0}, 2) == 5.0 &&
                     std::fabs(largest_eigenvalue({2.0, 1.0, 1.0, 2.0}, 2) - 3.0) <= 1e-12;
    const bool pass = worst <= 1e-12 && finite + agree_inf == 100 && eig;
    report(9, pass, "single-treatment reduction and eigenvalue references",
           fmt("max |difference| = %.2e over %d finite fixtures, eigen exact: %s", worst, finite,
               eig ? "yes" : "no"));
}

// ---------------------------------------------------------------- 10
void criterion_properties() {
    Rng rng(1010);
    bool ok = true;

    // canonical labeling idempotent
    for (int it = 0; it < 100 && ok; ++it) {
        auto t = test_helpers::random_tree(3, 3, rng);
        auto once = t;
        once.canonicalize();
        auto twice = once;
        twice.canonicalize();
        ok = once == twice;
    }

    // tree distance: identity, symmetry, triangle
    auto ref = test_helpers::random_sample(300, 2, rng);
    for (int it = 0; it < 50 && ok; ++it) {
        auto a = test_helpers::random_tree(2, 2, rng);
        auto b = test_helpers::random_tree(2, 2, rng);
        auto c = test_helpers::random_tree(2, 2, rng);
        if (a.leaf_count() != b.leaf_count() || b.leaf_count() != c.leaf_count()) continue;
        ok = tree_distance(a, a, ref) == 0.0 &&
             tree_distance(a, b, ref) == tree_distance(b, a, ref) &&
             tree_distance(a, c, ref) <=
                 tree_distance(a, b, ref) + tree_distance(b, c, ref) + 1e-12;
    }

    // subgroup estimates recombine into the global estimate
    {
        auto deep = test_helpers::depth2_tree();
        auto top = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
        top.split_leaf(0, Cut{0, 0.5});
        top.canonicalize();
        auto s = test_helpers::random_sample(500, 2, rng);
        const auto sub = estimate_subgroups(deep, top, s);
        double theta = 0.0;
        std::size_t n = 0;
        for (const auto& [g, r] : sub.by_subgroup) {
            theta += static_cast<double>(r.n) * r.theta_hat;
            n += r.n;
        }
        ok = ok && n == sub.global.n &&
             std::fabs(theta / static_cast<double>(n) - sub.global.theta_hat) <= 1e-12;
    }

    // translation equivariance
    {
        auto tree = test_helpers::depth2_tree();
        Rng r2(55);
        auto s = test_helpers::random_sample(300, 2, r2);
        auto rows = s.rows();
        const auto base = estimate_ate(tree, s);
        for (auto& r : rows) r.y += 11.0;
        const auto shifted = estimate_ate(tree, Sample(rows, tree.space()));
        ok = ok && std::fabs(shifted.theta_hat - base.theta_hat) <= 1e-9 &&
             std::fabs(shifted.v_hat - base.v_hat) <= 1e-9;
    }

    report(10, ok, "structural property suite", ok ? "all exact assertions hold" : "violated");
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    criterion_sbr_floor();
    criterion_oracle_equivalence();
    criterion_estimator_oracle();
    criterion_ate_ground_truth();
    criterion_table1();
    criterion_overfitting();
    criterion_bad_tree_coverage();
    criterion_variance_consistency();
    criterion_multi_reduction();
    criterion_properties();
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
    std::printf("%d/10 criteria passed in %llds\n", 10 - failures,
                static_cast<long long>(secs.count()));
    return failures;
}
