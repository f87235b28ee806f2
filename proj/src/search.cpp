#include "strattree/search.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>

namespace strattree {

namespace {

std::vector<double> grid_in_interval(const std::vector<double>& cands, double lo, double hi) {
    std::vector<double> out;
    for (double t : cands) {
        if (lo < t && t < hi) out.push_back(t);
    }
    return out;
}

// root-to-leaf walk, descending left/right with probability 1/2
std::vector<int> random_path(const StratificationTree& tree, Rng& rng) {
    std::vector<int> path;
    int idx = tree.root();
    path.push_back(idx);
    while (!tree.nodes()[static_cast<std::size_t>(idx)].is_leaf()) {
        const auto& n = tree.nodes()[static_cast<std::size_t>(idx)];
        idx = rng.coin() ? n.left : n.right;
        path.push_back(idx);
    }
    return path;
}

// uniform choice among the internal nodes of a random root-to-leaf path;
// -1 when the tree is a single leaf
int random_internal_node(const StratificationTree& tree, Rng& rng) {
    if (tree.nodes()[0].is_leaf()) return -1;
    const auto path = random_path(tree, rng);
    return path[rng.uniform_index(path.size() - 1)];
}

// uniform position on a random root-to-leaf walk (leaf included)
int random_node(const StratificationTree& tree, Rng& rng) {
    const auto path = random_path(tree, rng);
    return path[rng.uniform_index(path.size())];
}

void finish(StratificationTree& t, const Sample& pilot, const FitConfig& config) {
    t.canonicalize();
    const auto strata = stratum_indices(t, pilot);
    if (config.proportions_hook) {
        config.proportions_hook(t, pilot, strata, config);
    } else {
        optimize_leaf_proportions_inplace(t, pilot, strata, config);
    }
}

double evaluate(const StratificationTree& t, const Sample& pilot, const FitConfig& config) {
    if (config.objective_hook) {
        return config.objective_hook(pilot, stratum_indices(t, pilot), t, config);
    }
    return empirical_variance(t, pilot, config);
}

bool try_split_at(StratificationTree& t, int leaf_idx,
                  const std::vector<std::vector<double>>& grid, Rng& rng) {
    const auto cell = t.cell_of(leaf_idx);
    std::vector<int> dims;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!grid_in_interval(grid[j], cell.lo[j], cell.hi[j]).empty())
            dims.push_back(static_cast<int>(j));
    }
    if (dims.empty()) return false;
    const int dim = dims[rng.uniform_index(dims.size())];
    const auto cands = grid_in_interval(grid[static_cast<std::size_t>(dim)],
                                        cell.lo[static_cast<std::size_t>(dim)],
                                        cell.hi[static_cast<std::size_t>(dim)]);
    t.split_leaf(leaf_idx, Cut{dim, cands[rng.uniform_index(cands.size())]});
    return true;
}

StratificationTree op_minor(const StratificationTree& parent,
                            const std::vector<std::vector<double>>& grid, Rng& rng);

StratificationTree op_split(const StratificationTree& parent,
                            const std::vector<std::vector<double>>& grid, const FitConfig& config,
                            Rng& rng) {
    for (int attempt = 0; attempt < 3; ++attempt) {
        StratificationTree t = parent;
        const auto path = random_path(t, rng);
        const int leaf = path.back();
        const int depth = static_cast<int>(path.size()) - 1;
        if (depth < config.max_depth && try_split_at(t, leaf, grid, rng)) return t;
    }
    return op_minor(parent, grid, rng);
}

StratificationTree op_prune(const StratificationTree& parent,
                            const std::vector<std::vector<double>>& grid, const FitConfig& config,
                            Rng& rng) {
    if (parent.nodes()[0].is_leaf()) {
        // nothing to prune on a single leaf
        if (config.max_depth >= 1) return op_split(parent, grid, config, rng);
        return parent;
    }
    StratificationTree t = parent;
    int idx = t.root();
    while (true) {
        const auto& n = t.nodes()[static_cast<std::size_t>(idx)];
        const bool left_leaf = t.nodes()[static_cast<std::size_t>(n.left)].is_leaf();
        const bool right_leaf = t.nodes()[static_cast<std::size_t>(n.right)].is_leaf();
        if (left_leaf && right_leaf) break;
        if (left_leaf) {
            idx = n.right;
        } else if (right_leaf) {
            idx = n.left;
        } else {
            idx = rng.coin() ? n.left : n.right;
        }
    }
    t.prune_to_leaf(idx);
    return t;
}

StratificationTree op_minor(const StratificationTree& parent,
                            const std::vector<std::vector<double>>& grid, Rng& rng) {
    if (parent.nodes()[0].is_leaf()) return parent;
    StratificationTree t = parent;
    const int node = random_internal_node(t, rng);
    const auto cell = t.cell_of(node);
    const Cut original = t.nodes()[static_cast<std::size_t>(node)].cut;
    const auto j = static_cast<std::size_t>(original.dim);
    auto cands = grid_in_interval(grid[j], cell.lo[j], cell.hi[j]);
    std::erase(cands, original.threshold);
    if (cands.empty()) return t;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double thr = cands[rng.uniform_index(cands.size())];
        t.nodes()[static_cast<std::size_t>(node)].cut.threshold = thr;
        if (t.structurally_valid()) return t;
    }
    t.nodes()[static_cast<std::size_t>(node)].cut = original;
    return t;
}

StratificationTree op_major(const StratificationTree& parent,
                            const std::vector<std::vector<double>>& grid, const FitConfig& config,
                            Rng& rng) {
    if (parent.nodes()[0].is_leaf()) {
        if (config.max_depth >= 1) return op_split(parent, grid, config, rng);
        return parent;
    }
    StratificationTree last = parent;
    for (int attempt = 0; attempt < 3; ++attempt) {
        StratificationTree t = parent;
        const int node = random_internal_node(t, rng);
        const auto cell = t.cell_of(node);
        std::vector<int> dims;
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (!grid_in_interval(grid[j], cell.lo[j], cell.hi[j]).empty())
                dims.push_back(static_cast<int>(j));
        }
        if (dims.empty()) continue;
        const int dim = dims[rng.uniform_index(dims.size())];
        const auto cands = grid_in_interval(grid[static_cast<std::size_t>(dim)],
                                            cell.lo[static_cast<std::size_t>(dim)],
                                            cell.hi[static_cast<std::size_t>(dim)]);
        t.nodes()[static_cast<std::size_t>(node)].cut =
            Cut{dim, cands[rng.uniform_index(cands.size())]};
        if (t.structurally_valid()) return t;
        last = t;
    }
    last.destroy_invalid_subtrees();
    return last;
}

StratificationTree op_crossover(const StratificationTree& parent,
                                std::span<const StratificationTree> population, Rng& rng) {
    StratificationTree t = parent;
    if (population.empty()) return t;
    const auto& donor = population[rng.uniform_index(population.size())];
    const int target = random_node(t, rng);
    const int source = random_node(donor, rng);
    t.graft(target, donor, source);
    t.destroy_invalid_subtrees();
    return t;
}

}  // namespace

std::vector<std::vector<double>> build_split_grid(const Sample& pilot, const FitConfig& config) {
    const auto& space = pilot.space();
    if (!config.split_grid.empty()) {
        if (config.split_grid.size() != space.num_dims()) {
            throw std::invalid_argument("split_grid must have one entry per dimension");
        }
        return config.split_grid;
    }
    std::vector<std::vector<double>> grid(space.num_dims());
    for (std::size_t j = 0; j < space.num_dims(); ++j) {
        const auto& dim = space.dim(j);
        if (dim.kind == DimKind::Discrete) {
            auto support = dim.support;
            std::sort(support.begin(), support.end());
            support.pop_back();  // cutting at the top point leaves an empty right cell
            grid[j] = std::move(support);
        } else {
            std::vector<double> vals;
            vals.reserve(pilot.size());
            for (const auto& r : pilot.rows()) vals.push_back(r.x[j]);
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                grid[j].push_back(0.5 * (vals[i] + vals[i + 1]));
            }
        }
    }
    return grid;
}

std::vector<StratificationTree> generate_population(const Sample& pilot, const FitConfig& config,
                                                    const std::vector<std::vector<double>>& grid,
                                                    Rng& rng) {
    std::vector<int> dims;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (!grid[j].empty()) dims.push_back(static_cast<int>(j));
    }
    if (dims.empty()) {
        throw std::runtime_error("no valid split candidates on any dimension");
    }
    std::vector<StratificationTree> pop;
    pop.reserve(config.ea.population);
    for (std::size_t i = 0; i < config.ea.population; ++i) {
        auto t = StratificationTree::single_leaf(pilot.space(), config.max_depth);
        const int dim = dims[rng.uniform_index(dims.size())];
        const auto& cands = grid[static_cast<std::size_t>(dim)];
        if (config.max_depth >= 1) {
            t.split_leaf(0, Cut{dim, cands[rng.uniform_index(cands.size())]});
        }
        finish(t, pilot, config);
        pop.push_back(std::move(t));
    }
    return pop;
}

StratificationTree vary(const StratificationTree& parent,
                        std::span<const StratificationTree> population, const Sample& pilot,
                        const FitConfig& config, const std::vector<std::vector<double>>& grid,
                        Rng& rng) {
    StratificationTree child;
    switch (rng.uniform_index(5)) {
        case 0: child = op_split(parent, grid, config, rng); break;
        case 1: child = op_prune(parent, grid, config, rng); break;
        case 2: child = op_minor(parent, grid, rng); break;
        case 3: child = op_major(parent, grid, config, rng); break;
        default: child = op_crossover(parent, population, rng); break;
    }
    finish(child, pilot, config);
    return child;
}

FitReport fit(const Sample& pilot, const FitConfig& config) {
    config.validate();
    if (pilot.empty()) throw std::invalid_argument("pilot sample is empty");
    if (pilot.num_arms() < 2) throw std::invalid_argument("pilot sample needs both arms");

    if (config.max_depth == 0) {
        FitReport report;
        auto t = StratificationTree::single_leaf(pilot.space(), 0);
        finish(t, pilot, config);
        report.objective = evaluate(t, pilot, config);
        report.tree = std::move(t);
        report.terminated = "converged";
        report.all_infinite = !std::isfinite(report.objective);
        return report;
    }

    const auto grid = build_split_grid(pilot, config);

    Rng init_rng(derive_seed(config.ea.seed, 0));
    auto parents = generate_population(pilot, config, grid, init_rng);
    std::vector<double> values(parents.size());
    for (std::size_t i = 0; i < parents.size(); ++i) {
        values[i] = evaluate(parents[i], pilot, config);
    }

    FitReport report;
    auto update_best = [&]() {
        for (std::size_t i = 0; i < parents.size(); ++i) {
            if (values[i] < report.objective) {
                report.objective = values[i];
                report.tree = parents[i];
            }
        }
    };
    update_best();

    const std::size_t top = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(parents.size()))));
    std::vector<double> scratch;
    int streak = 0;
    report.terminated = "max_iterations";

    for (int gen = 1; gen <= config.ea.max_iterations; ++gen) {
        report.generations = gen;
        const std::vector<StratificationTree> snapshot = parents;
        for (std::size_t i = 0; i < parents.size(); ++i) {
            Rng rng(derive_seed(config.ea.seed, static_cast<std::uint64_t>(gen), i));
            auto child = vary(snapshot[i], snapshot, pilot, config, grid, rng);
            const double v = evaluate(child, pilot, config);
            if (v < values[i]) {  // ties keep the parent
                parents[i] = std::move(child);
                values[i] = v;
            }
        }
        update_best();
        report.trace.push_back(report.objective);

        scratch = values;
        std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(top),
                          scratch.end());
        const double lo = scratch[0];
        const double hi = scratch[top - 1];
        const bool ok = std::isfinite(hi) &&
                        (hi - lo) <= config.ea.tolerance * std::max(1.0, std::fabs(lo));
        streak = ok ? streak + 1 : 0;
        if (streak >= config.ea.patience) {
            report.terminated = "converged";
            break;
        }
    }

    if (!std::isfinite(report.objective)) {
        report.all_infinite = true;
        auto t = StratificationTree::single_leaf(pilot.space(), config.max_depth);
        finish(t, pilot, config);
        report.tree = std::move(t);
        report.objective = evaluate(report.tree, pilot, config);
    }
    return report;
}

namespace {

// stack-allocated tree blueprint used by the exhaustive enumerator
struct Blueprint {
    const Cut* cut = nullptr;  // null = leaf
    const Blueprint* left = nullptr;
    const Blueprint* right = nullptr;
};

double count_trees(const CellBounds& cell, int depth_left,
                   const std::vector<std::vector<double>>& grid) {
    double total = 1.0;  // the leaf
    if (depth_left == 0) return total;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (double t : grid[j]) {
            if (!(cell.lo[j] < t && t < cell.hi[j])) continue;
            CellBounds lc = cell, rc = cell;
            lc.hi[j] = t;
            rc.lo[j] = t;
            total += count_trees(lc, depth_left - 1, grid) * count_trees(rc, depth_left - 1, grid);
            if (total > 1e15) return total;
        }
    }
    return total;
}

void enumerate(const CellBounds& cell, int depth_left,
               const std::vector<std::vector<double>>& grid,
               const std::function<void(const Blueprint*)>& emit) {
    Blueprint leaf;
    emit(&leaf);
    if (depth_left == 0) return;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (double t : grid[j]) {
            if (!(cell.lo[j] < t && t < cell.hi[j])) continue;
            const Cut cut{static_cast<int>(j), t};
            CellBounds lc = cell, rc = cell;
            lc.hi[j] = t;
            rc.lo[j] = t;
            enumerate(lc, depth_left - 1, grid, [&](const Blueprint* l) {
                enumerate(rc, depth_left - 1, grid, [&](const Blueprint* r) {
                    Blueprint node{&cut, l, r};
                    emit(&node);
                });
            });
        }
    }
}

void materialize(StratificationTree& t, int node_idx, const Blueprint* bp) {
    if (bp->cut == nullptr) return;
    t.split_leaf(node_idx, *bp->cut);
    const auto& n = t.nodes()[static_cast<std::size_t>(node_idx)];
    const int l = n.left, r = n.right;
    materialize(t, l, bp->left);
    materialize(t, r, bp->right);
}

}  // namespace

OracleResult exhaustive_search(const Sample& pilot, int max_depth,
                               const std::vector<std::vector<double>>& grid,
                               const FitConfig& config, std::size_t eval_budget) {
    if (grid.size() != pilot.space().num_dims()) {
        throw std::invalid_argument("grid must have one entry per dimension");
    }
    CellBounds root;
    root.lo.resize(grid.size());
    root.hi.resize(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        root.lo[j] = pilot.space().dim(j).lower;
        root.hi[j] = pilot.space().dim(j).upper;
    }
    const double count = count_trees(root, max_depth, grid);
    if (count > static_cast<double>(eval_budget)) {
        throw std::runtime_error("exhaustive_search: " + std::to_string(count) +
                                 " candidate trees exceed the budget of " +
                                 std::to_string(eval_budget));
    }

    OracleResult result;
    std::string best_key;
    std::set<std::string> seen;
    enumerate(root, max_depth, grid, [&](const Blueprint* bp) {
        auto t = StratificationTree::single_leaf(pilot.space(), max_depth);
        materialize(t, 0, bp);
        t.canonicalize();
        auto key = t.structural_key();
        if (!seen.insert(key).second) return;  // canonical duplicate
        const auto strata = stratum_indices(t, pilot);
        if (config.proportions_hook) {
            config.proportions_hook(t, pilot, strata, config);
        } else {
            optimize_leaf_proportions_inplace(t, pilot, strata, config);
        }
        const double v = config.objective_hook ? config.objective_hook(pilot, strata, t, config)
                                               : empirical_variance(pilot, strata, t, config);
        result.trees_evaluated++;
        if (v < result.objective ||
            (v == result.objective && !best_key.empty() && key < best_key)) {
            result.objective = v;
            result.tree = t;
            best_key = std::move(key);
        } else if (!std::isfinite(v) && !std::isfinite(result.objective) && best_key.empty()) {
            result.tree = t;
            best_key = std::move(key);
        }
    });
    return result;
}

}  // namespace strattree
