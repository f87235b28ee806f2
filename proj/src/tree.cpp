#include "strattree/tree.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace strattree {

StratificationTree StratificationTree::single_leaf(const CovariateSpace& space, int max_depth,
                                                   std::vector<double> pi) {
    StratificationTree t;
    t.space_ = space;
    t.max_depth_ = max_depth;
    TreeNode leaf;
    leaf.pi = std::move(pi);
    t.nodes_.push_back(std::move(leaf));
    return t;
}

int StratificationTree::depth_below(int idx) const {
    const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_below(n.left), depth_below(n.right));
}

int StratificationTree::depth() const { return nodes_.empty() ? 0 : depth_below(0); }

int StratificationTree::leaf_count() const {
    int k = 0;
    std::function<void(int)> walk = [&](int idx) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) {
            ++k;
        } else {
            walk(n.left);
            walk(n.right);
        }
    };
    if (!nodes_.empty()) walk(0);
    return k;
}

int StratificationTree::num_treatments() const {
    int idx = 0;
    while (!nodes_[static_cast<std::size_t>(idx)].is_leaf()) idx = nodes_[static_cast<std::size_t>(idx)].left;
    return static_cast<int>(nodes_[static_cast<std::size_t>(idx)].pi.size());
}

std::vector<int> StratificationTree::leaves_in_label_order() const {
    std::vector<int> out;
    std::function<void(int)> walk = [&](int idx) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) {
            out.push_back(idx);
        } else {
            walk(n.left);
            walk(n.right);
        }
    };
    if (!nodes_.empty()) walk(0);
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        return nodes_[static_cast<std::size_t>(a)].label < nodes_[static_cast<std::size_t>(b)].label;
    });
    return out;
}

int StratificationTree::stratum_of(std::span<const double> x) const {
    space_.require_inside(x);
    int idx = 0;
    while (true) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) return n.label;
        idx = (x[static_cast<std::size_t>(n.cut.dim)] <= n.cut.threshold) ? n.left : n.right;
    }
}

CellBounds StratificationTree::cell_of(int node_idx) const {
    CellBounds cell;
    const std::size_t d = space_.num_dims();
    cell.lo.resize(d);
    cell.hi.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        cell.lo[j] = space_.dim(j).lower;
        cell.hi[j] = space_.dim(j).upper;
    }
    std::function<bool(int)> walk = [&](int idx) -> bool {
        if (idx == node_idx) return true;
        const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) return false;
        const auto j = static_cast<std::size_t>(n.cut.dim);
        const double saved_hi = cell.hi[j];
        cell.hi[j] = n.cut.threshold;
        if (walk(n.left)) return true;
        cell.hi[j] = saved_hi;
        const double saved_lo = cell.lo[j];
        cell.lo[j] = n.cut.threshold;
        if (walk(n.right)) return true;
        cell.lo[j] = saved_lo;
        return false;
    };
    if (!walk(0)) throw std::invalid_argument("node index not reachable from root");
    return cell;
}

void StratificationTree::canonicalize() {
    // Pull the smallest cut to the top wherever a partition admits two cut
    // orderings: this is possible exactly when both children are internal
    // nodes sharing an identical cut, in which case the grid can be rotated.
    std::function<void(int)> canon = [&](int idx) {
        TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) return;
        canon(n.left);
        canon(n.right);
        while (true) {
            TreeNode& cur = nodes_[static_cast<std::size_t>(idx)];
            TreeNode& l = nodes_[static_cast<std::size_t>(cur.left)];
            TreeNode& r = nodes_[static_cast<std::size_t>(cur.right)];
            if (l.is_leaf() || r.is_leaf() || !(l.cut == r.cut) || !(l.cut < cur.cut)) break;
            const Cut c1 = cur.cut;
            const Cut c2 = l.cut;
            const int a = l.left, b = l.right, c = r.left, d = r.right;
            cur.cut = c2;
            l.cut = c1;
            l.left = a;
            l.right = c;
            r.cut = c1;
            r.left = b;
            r.right = d;
            canon(cur.left);
            canon(cur.right);
        }
    };
    if (nodes_.empty()) return;
    canon(0);
    // left-to-right leaf labels
    int next = 1;
    std::function<void(int)> relabel = [&](int idx) {
        TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) {
            n.label = next++;
        } else {
            relabel(n.left);
            relabel(n.right);
        }
    };
    relabel(0);
}

bool StratificationTree::structurally_valid() const {
    if (nodes_.empty()) return false;
    if (depth() > max_depth_) return false;
    bool ok = true;
    std::function<void(int, CellBounds&)> walk = [&](int idx, CellBounds& cell) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) return;
        const auto j = static_cast<std::size_t>(n.cut.dim);
        if (!(cell.lo[j] < n.cut.threshold && n.cut.threshold < cell.hi[j])) {
            ok = false;
            return;
        }
        const double hi = cell.hi[j];
        cell.hi[j] = n.cut.threshold;
        walk(n.left, cell);
        cell.hi[j] = hi;
        const double lo = cell.lo[j];
        cell.lo[j] = n.cut.threshold;
        walk(n.right, cell);
        cell.lo[j] = lo;
    };
    CellBounds cell;
    const std::size_t d = space_.num_dims();
    cell.lo.resize(d);
    cell.hi.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        cell.lo[j] = space_.dim(j).lower;
        cell.hi[j] = space_.dim(j).upper;
    }
    walk(0, cell);
    return ok;
}

void StratificationTree::destroy_invalid_subtrees() {
    std::function<void(int, CellBounds&, int)> walk = [&](int idx, CellBounds& cell, int dep) {
        TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
        if (n.is_leaf()) return;
        const auto j = static_cast<std::size_t>(n.cut.dim);
        const bool cut_ok = cell.lo[j] < n.cut.threshold && n.cut.threshold < cell.hi[j];
        if (!cut_ok || dep >= max_depth_) {
            // collapse to a leaf; pi taken from the leftmost descendant leaf
            int probe = idx;
            while (!nodes_[static_cast<std::size_t>(probe)].is_leaf())
                probe = nodes_[static_cast<std::size_t>(probe)].left;
            n.pi = nodes_[static_cast<std::size_t>(probe)].pi;
            n.left = -1;
            n.right = -1;
            return;
        }
        const double hi = cell.hi[j];
        cell.hi[j] = n.cut.threshold;
        walk(n.left, cell, dep + 1);
        cell.hi[j] = hi;
        const double lo = cell.lo[j];
        cell.lo[j] = n.cut.threshold;
        walk(n.right, cell, dep + 1);
        cell.lo[j] = lo;
    };
    CellBounds cell;
    const std::size_t d = space_.num_dims();
    cell.lo.resize(d);
    cell.hi.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        cell.lo[j] = space_.dim(j).lower;
        cell.hi[j] = space_.dim(j).upper;
    }
    walk(0, cell, 0);
    compact();
}

void StratificationTree::split_leaf(int node_idx, const Cut& cut) {
    TreeNode& n = nodes_[static_cast<std::size_t>(node_idx)];
    if (!n.is_leaf()) throw std::invalid_argument("split_leaf on internal node");
    TreeNode l, r;
    l.pi = n.pi;
    r.pi = n.pi;
    const int li = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(l));
    const int ri = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(r));
    TreeNode& nn = nodes_[static_cast<std::size_t>(node_idx)];
    nn.cut = cut;
    nn.left = li;
    nn.right = ri;
}

void StratificationTree::prune_to_leaf(int node_idx) {
    TreeNode& n = nodes_[static_cast<std::size_t>(node_idx)];
    if (n.is_leaf()) return;
    int probe = node_idx;
    while (!nodes_[static_cast<std::size_t>(probe)].is_leaf())
        probe = nodes_[static_cast<std::size_t>(probe)].left;
    n.pi = nodes_[static_cast<std::size_t>(probe)].pi;
    n.left = -1;
    n.right = -1;
    compact();
}

void StratificationTree::graft(int node_idx, const StratificationTree& donor, int donor_node_idx) {
    // copy donor subtree into our node vector, then rewire node_idx
    std::function<int(int)> copy = [&](int didx) -> int {
        const TreeNode& dn = donor.nodes_[static_cast<std::size_t>(didx)];
        TreeNode copy_node = dn;
        if (!dn.is_leaf()) {
            copy_node.left = copy(dn.left);
            copy_node.right = copy(dn.right);
        }
        nodes_.push_back(std::move(copy_node));
        return static_cast<int>(nodes_.size() - 1);
    };
    const int sub = copy(donor_node_idx);
    nodes_[static_cast<std::size_t>(node_idx)] = nodes_[static_cast<std::size_t>(sub)];
    compact();
}

void StratificationTree::compact() {
    std::vector<TreeNode> fresh;
    fresh.reserve(nodes_.size());
    std::function<int(int)> copy = [&](int idx) -> int {
        const TreeNode n = nodes_[static_cast<std::size_t>(idx)];
        const int pos = static_cast<int>(fresh.size());
        fresh.push_back(n);
        if (!n.is_leaf()) {
            fresh[static_cast<std::size_t>(pos)].left = copy(n.left);
            fresh[static_cast<std::size_t>(pos)].right = copy(n.right);
        }
        return pos;
    };
    if (!nodes_.empty()) copy(0);
    nodes_ = std::move(fresh);
}

void StratificationTree::key_below(int idx, std::string& out) const {
    const TreeNode& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) {
        out += 'L';
        return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "I%d:%.17g(", n.cut.dim, n.cut.threshold);
    out += buf;
    key_below(n.left, out);
    out += ',';
    key_below(n.right, out);
    out += ')';
}

std::string StratificationTree::structural_key() const {
    std::string out;
    if (!nodes_.empty()) key_below(0, out);
    return out;
}

bool operator==(const StratificationTree& a, const StratificationTree& b) {
    if (!(a.space_ == b.space_)) return false;
    std::function<bool(int, int)> eq = [&](int ia, int ib) -> bool {
        const TreeNode& na = a.nodes_[static_cast<std::size_t>(ia)];
        const TreeNode& nb = b.nodes_[static_cast<std::size_t>(ib)];
        if (na.is_leaf() != nb.is_leaf()) return false;
        if (na.is_leaf()) return na.label == nb.label && na.pi == nb.pi;
        if (!(na.cut == nb.cut)) return false;
        return eq(na.left, nb.left) && eq(na.right, nb.right);
    };
    if (a.nodes_.empty() || b.nodes_.empty()) return a.nodes_.empty() == b.nodes_.empty();
    return eq(0, 0);
}

std::vector<int> stratum_indices(const StratificationTree& tree, const Sample& sample) {
    std::vector<int> out;
    out.reserve(sample.size());
    for (const auto& r : sample.rows()) out.push_back(tree.stratum_of(r.x) - 1);
    return out;
}

double tree_distance(const StratificationTree& t1, const StratificationTree& t2,
                     const Sample& reference) {
    if (t1.leaf_count() != t2.leaf_count()) {
        throw std::invalid_argument("tree_distance requires equal leaf counts, got " +
                                    std::to_string(t1.leaf_count()) + " and " +
                                    std::to_string(t2.leaf_count()));
    }
    if (reference.empty()) return 0.0;
    std::size_t mismatches = 0;
    for (const auto& r : reference.rows()) {
        if (t1.stratum_of(r.x) != t2.stratum_of(r.x)) ++mismatches;
    }
    // a row in different strata contributes to exactly two symmetric differences
    return 2.0 * static_cast<double>(mismatches) / static_cast<double>(reference.size());
}

}  // namespace strattree
