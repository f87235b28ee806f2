#pragma once

// Shared fixtures for the test suites.

#include <vector>

#include "strattree/rng.hpp"
#include "strattree/sample.hpp"
#include "strattree/tree.hpp"

namespace test_helpers {

using namespace strattree;

// Full depth-2 tree on [0,1]^2: root x1<=0.5, children x2<=0.5 / x2<=0.7.
inline StratificationTree depth2_tree(double pi = 0.5) {
    auto t = StratificationTree::single_leaf(CovariateSpace::unit_cube(2), 2, {pi});
    t.split_leaf(0, Cut{0, 0.5});
    t.split_leaf(t.nodes()[0].left, Cut{1, 0.5});
    t.split_leaf(t.nodes()[0].right, Cut{1, 0.7});
    t.canonicalize();
    return t;
}

// Random valid tree on the unit cube: repeated random leaf splits.
inline StratificationTree random_tree(std::size_t d, int max_depth, Rng& rng) {
    auto t = StratificationTree::single_leaf(CovariateSpace::unit_cube(d), max_depth);
    const int splits = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_depth) + 1));
    for (int s = 0; s < (1 << splits) - 1; ++s) {
        std::vector<int> leaves;
        for (int i = 0; i < static_cast<int>(t.nodes().size()); ++i) {
            if (t.nodes()[static_cast<std::size_t>(i)].is_leaf()) leaves.push_back(i);
        }
        const int idx = leaves[rng.uniform_index(leaves.size())];
        const auto cell = t.cell_of(idx);
        const int dim = static_cast<int>(rng.uniform_index(d));
        const auto ud = static_cast<std::size_t>(dim);
        const double thr = rng.uniform(cell.lo[ud], cell.hi[ud]);
        if (thr <= cell.lo[ud] || thr >= cell.hi[ud]) continue;
        t.split_leaf(idx, Cut{dim, thr});
        t.destroy_invalid_subtrees();
        t.compact();
    }
    t.canonicalize();
    for (auto& n : t.nodes()) {
        if (n.is_leaf()) n.pi = {rng.uniform(0.1, 0.9)};
    }
    return t;
}

// Random two-arm sample with uniform covariates.
inline Sample random_sample(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<SampleRow> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        rows[i].x.resize(d);
        for (auto& x : rows[i].x) x = rng.uniform();
        rows[i].a = (i < 2) ? static_cast<int>(i) : static_cast<int>(rng.coin());
        rows[i].y = rng.normal();
    }
    return Sample(std::move(rows), CovariateSpace::unit_cube(d));
}

}  // namespace test_helpers
