#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "helpers.hpp"
#include "strattree/estimate.hpp"

using namespace strattree;
using test_helpers::depth2_tree;

namespace {

// Independent brute-force oracle: recomputes theta, V_H, V_Y from raw rows
// with naive loops, taking the stratum of each row from a hand-coded
// predicate rather than the tree.
struct Oracle {
    double theta = 0.0;
    double v_h = 0.0;
    double v_y = 0.0;
    std::size_t n = 0;
};

Oracle brute_force(const std::vector<SampleRow>& rows, int K,
                   const std::function<int(const std::vector<double>&)>& stratum) {
    std::vector<std::vector<double>> y0(static_cast<std::size_t>(K)), y1(static_cast<std::size_t>(K));
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
    Oracle o;
    o.n = rows.size();
    const double n = static_cast<double>(o.n);
    std::vector<double> beta(static_cast<std::size_t>(K)), share(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        beta[uk] = mean(y1[uk]) - mean(y0[uk]);
        share[uk] = static_cast<double>(y0[uk].size() + y1[uk].size()) / n;
        o.theta += share[uk] * beta[uk];
    }
    for (int k = 0; k < K; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        o.v_h += share[uk] * (beta[uk] - o.theta) * (beta[uk] - o.theta);
        o.v_y += n * share[uk] * share[uk] *
                 (var(y1[uk]) / static_cast<double>(y1[uk].size()) +
                  var(y0[uk]) / static_cast<double>(y0[uk].size()));
    }
    return o;
}

std::vector<SampleRow> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<SampleRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].x.resize(d);
        for (auto& x : rows[i].x) x = rng.uniform();
        rows[i].a = (i < 2) ? static_cast<int>(i) : static_cast<int>(rng.coin());
        rows[i].y = rng.normal(1.0 + rows[i].x[0], 1.0 + static_cast<double>(rows[i].a));
    }
    return rows;
}

void check_against_oracle(const StratificationTree& tree, const std::vector<SampleRow>& rows,
                          int K, const std::function<int(const std::vector<double>&)>& stratum) {
    Sample s(rows, tree.space());
    const auto r = estimate_ate(tree, s);
    const auto o = brute_force(rows, K, stratum);
    CHECK(r.n == o.n);
    CHECK(r.theta_hat == doctest::Approx(o.theta).epsilon(1e-12));
    CHECK(r.v_h == doctest::Approx(o.v_h).epsilon(1e-12));
    CHECK(r.v_y == doctest::Approx(o.v_y).epsilon(1e-12));
    CHECK(r.v_hat == doctest::Approx(o.v_h + o.v_y).epsilon(1e-12));
    // CI is symmetric around theta with half-width z * se
    CHECK(r.ci_low == doctest::Approx(2.0 * r.theta_hat - r.ci_high).epsilon(1e-12));
    CHECK(r.ci_high - r.theta_hat ==
          doctest::Approx(normal_quantile(0.975) * r.se()).epsilon(1e-12));
}

}  // namespace

TEST_CASE("normal_quantile reference values") {
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-8));
    CHECK(normal_quantile(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-8));
    CHECK(normal_quantile(0.001) == doctest::Approx(-3.090232306167814).epsilon(1e-8));
    CHECK(normal_quantile(0.25) == doctest::Approx(-0.6744897501960817).epsilon(1e-8));
    CHECK(normal_quantile(0.3) == doctest::Approx(-normal_quantile(0.7)).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

TEST_CASE("estimator matches the brute-force oracle, K = 1") {
    auto tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 0);
    check_against_oracle(tree, random_rows(101, 1, 3), 1,
                         [](const std::vector<double>&) { return 1; });
}

TEST_CASE("estimator matches the brute-force oracle, K = 2") {
    auto tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 1);
    tree.split_leaf(0, Cut{0, 0.5});
    tree.canonicalize();
    check_against_oracle(tree, random_rows(250, 1, 4), 2,
                         [](const std::vector<double>& x) { return x[0] <= 0.5 ? 1 : 2; });
}

TEST_CASE("estimator matches the brute-force oracle, K = 4") {
    auto tree = depth2_tree();
    check_against_oracle(tree, random_rows(600, 2, 5), 4, [](const std::vector<double>& x) {
        if (x[0] <= 0.5) return x[1] <= 0.5 ? 1 : 2;
        return x[1] <= 0.7 ? 3 : 4;
    });
}

TEST_CASE("estimator rejects strata with an empty arm unless asked to drop them") {
    auto tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 1);
    tree.split_leaf(0, Cut{0, 0.5});
    tree.canonicalize();
    std::vector<SampleRow> rows = {
        {1.0, 0, {0.1}}, {2.0, 1, {0.2}}, {3.0, 0, {0.3}}, {4.0, 1, {0.4}},
        {9.0, 0, {0.9}},  // right stratum: control only
    };
    Sample s(rows, tree.space());
    CHECK_THROWS_WITH_AS(estimate_ate(tree, s), doctest::Contains("empty treatment arm"),
                         std::runtime_error);
    const auto r = estimate_ate(tree, s, 0.95, /*drop_empty_arms=*/true);
    CHECK(r.n == 4);  // the lone control row is excluded
    CHECK(r.theta_hat == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("estimate_ate ignores strata with no observations") {
    auto tree = depth2_tree();
    std::vector<SampleRow> rows;
    Rng rng(6);
    for (int i = 0; i < 60; ++i) {
        SampleRow r;
        r.x = {rng.uniform(0.0, 0.49), rng.uniform()};  // never reaches leaves 3, 4
        r.a = i % 2;
        r.y = rng.normal();
        rows.push_back(r);
    }
    Sample s(rows, tree.space());
    const auto r = estimate_ate(tree, s);
    CHECK(r.n == 60);
    CHECK(r.strata.size() <= 2);
}

TEST_CASE("translation equivariance") {
    auto tree = depth2_tree();
    auto rows = random_rows(300, 2, 11);
    Sample base(rows, tree.space());
    const auto r0 = estimate_ate(tree, base);

    // shifting every outcome by a constant changes nothing
    auto shifted = rows;
    for (auto& r : shifted) r.y += 17.25;
    const auto r1 = estimate_ate(tree, Sample(shifted, tree.space()));
    CHECK(r1.theta_hat == doctest::Approx(r0.theta_hat).epsilon(1e-10));
    CHECK(r1.v_hat == doctest::Approx(r0.v_hat).epsilon(1e-10));

    // shifting treated outcomes only moves theta by the shift, variances fixed
    auto treated = rows;
    for (auto& r : treated) {
        if (r.a == 1) r.y += 3.5;
    }
    const auto r2 = estimate_ate(tree, Sample(treated, tree.space()));
    CHECK(r2.theta_hat == doctest::Approx(r0.theta_hat + 3.5).epsilon(1e-10));
    CHECK(r2.v_y == doctest::Approx(r0.v_y).epsilon(1e-10));
}

TEST_CASE("strata-fixed-effects estimator") {
    auto tree = depth2_tree(0.5);
    auto rows = random_rows(400, 2, 13);
    Sample s(rows, tree.space());
    const auto sfe = estimate_ate_sfe(tree, s);

    // independent within-stratum demeaned OLS slope
    std::vector<double> sy(4, 0.0), sa(4, 0.0);
    std::vector<int> cnt(4, 0);
    auto strat = [](const std::vector<double>& x) {
        if (x[0] <= 0.5) return x[1] <= 0.5 ? 0 : 1;
        return x[1] <= 0.7 ? 2 : 3;
    };
    for (const auto& r : rows) {
        const auto k = static_cast<std::size_t>(strat(r.x));
        sy[k] += r.y;
        sa[k] += r.a;
        cnt[k]++;
    }
    double num = 0.0, den = 0.0;
    for (const auto& r : rows) {
        const auto k = static_cast<std::size_t>(strat(r.x));
        const double yd = r.y - sy[k] / cnt[k];
        const double ad = r.a - sa[k] / cnt[k];
        num += yd * ad;
        den += ad * ad;
    }
    CHECK(sfe.theta_hat == doctest::Approx(num / den).epsilon(1e-12));

    // unequal targets are refused
    auto unequal = tree;
    unequal.nodes()[static_cast<std::size_t>(unequal.leaves_in_label_order()[0])].pi = {0.3};
    CHECK_THROWS_AS(estimate_ate_sfe(unequal, s), std::runtime_error);
}

TEST_CASE("SFE equals the difference in means when K = 1") {
    auto tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 0);
    auto rows = random_rows(151, 1, 17);
    Sample s(rows, tree.space());
    CHECK(estimate_ate_sfe(tree, s).theta_hat ==
          doctest::Approx(estimate_ate(tree, s).theta_hat).epsilon(1e-12));
}

TEST_CASE("pooled estimate is the sample-size weighted combination") {
    auto tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(1), 0);
    auto pilot_rows = random_rows(100, 1, 19);
    auto main_rows = random_rows(300, 1, 23);
    const auto p = estimate_ate(tree, Sample(pilot_rows, tree.space()));
    const auto w = estimate_ate(tree, Sample(main_rows, tree.space()));
    const auto pooled = estimate_pooled(p, w);
    const double lambda = 100.0 / 400.0;
    CHECK(pooled.n == 400);
    CHECK(pooled.theta_hat ==
          doctest::Approx(lambda * p.theta_hat + (1.0 - lambda) * w.theta_hat).epsilon(1e-12));
    CHECK(pooled.v_hat ==
          doctest::Approx(lambda * p.v_hat + (1.0 - lambda) * w.v_hat).epsilon(1e-12));

    // empty pilot: the wave-2 result passes through
    EstimateResult none;
    const auto same = estimate_pooled(none, w);
    CHECK(same.theta_hat == w.theta_hat);
    CHECK(same.n == w.n);
}

TEST_CASE("is_extension") {
    auto deep = depth2_tree();
    auto top = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    top.split_leaf(0, Cut{0, 0.5});
    top.canonicalize();
    CHECK(is_extension(deep, top));
    CHECK(is_extension(deep, deep));
    CHECK_FALSE(is_extension(top, deep));
    auto other = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    other.split_leaf(0, Cut{1, 0.5});
    other.canonicalize();
    CHECK_FALSE(is_extension(deep, other));
}

TEST_CASE("subgroup recombination identity") {
    auto deep = depth2_tree();
    auto top = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    top.split_leaf(0, Cut{0, 0.5});
    top.canonicalize();
    auto rows = random_rows(500, 2, 29);
    Sample s(rows, deep.space());

    const auto sub = estimate_subgroups(deep, top, s);
    REQUIRE(sub.by_subgroup.size() == 2);

    // subgroup estimates recombine exactly into the global estimate
    double theta = 0.0;
    std::size_t n = 0;
    for (const auto& [g, r] : sub.by_subgroup) {
        theta += static_cast<double>(r.n) * r.theta_hat;
        n += r.n;
    }
    CHECK(n == sub.global.n);
    theta /= static_cast<double>(n);
    CHECK(theta == doctest::Approx(sub.global.theta_hat).epsilon(1e-12));

    // each subgroup estimate equals the plain estimator on the restricted
    // sample
    std::vector<SampleRow> left_rows, right_rows;
    for (const auto& r : rows) (r.x[0] <= 0.5 ? left_rows : right_rows).push_back(r);
    auto left_tree = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    left_tree.split_leaf(0, Cut{1, 0.5});
    left_tree.canonicalize();
    const auto left_direct = estimate_ate(left_tree, Sample(left_rows, deep.space()));
    CHECK(sub.by_subgroup.at(1).theta_hat ==
          doctest::Approx(left_direct.theta_hat).epsilon(1e-12));
    CHECK(sub.by_subgroup.at(1).v_hat == doctest::Approx(left_direct.v_hat).epsilon(1e-12));

    // a non-extension is refused with the divergent cut named
    auto other = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    other.split_leaf(0, Cut{1, 0.5});
    other.canonicalize();
    CHECK_THROWS_WITH_AS(estimate_subgroups(deep, other, s), doctest::Contains("x2 <= 0.5"),
                         std::invalid_argument);
}

TEST_CASE("fit_subgroup_tree extends the subgroup skeleton") {
    auto top = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 1);
    top.split_leaf(0, Cut{0, 0.5});
    top.canonicalize();
    auto rows = random_rows(400, 2, 31);
    Sample pilot(rows, top.space());
    FitConfig config;
    config.max_depth = 2;
    config.ea.population = 30;
    config.ea.seed = 5;
    auto fitted = fit_subgroup_tree(pilot, top, config);
    CHECK(is_extension(fitted, top));
    CHECK(fitted.depth() <= 2);
    CHECK(fitted.structurally_valid());

    FitConfig too_deep = config;
    too_deep.max_depth = 0;
    CHECK_THROWS_AS(fit_subgroup_tree(pilot, top, too_deep), std::invalid_argument);
}
