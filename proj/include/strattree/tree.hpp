#pragma once

#include <span>
#include <string>
#include <vector>

#include "strattree/covariate_space.hpp"
#include "strattree/sample.hpp"

namespace strattree {

// Axis-aligned cut: x_dim <= threshold goes left, x_dim > threshold goes
// right. The boundary always routes left.
struct Cut {
    int dim = 0;  // 0-based dimension index
    double threshold = 0.0;

    friend bool operator==(const Cut& a, const Cut& b) {
        return a.dim == b.dim && a.threshold == b.threshold;
    }
    friend bool operator<(const Cut& a, const Cut& b) {
        if (a.dim != b.dim) return a.dim < b.dim;
        return a.threshold < b.threshold;
    }
};

struct TreeNode {
    Cut cut;                  // meaningful only for internal nodes
    int left = -1;            // node index, -1 for leaves
    int right = -1;
    int label = 1;            // leaf label in 1..K, set by canonicalize()
    std::vector<double> pi;   // leaf assignment targets, length J

    bool is_leaf() const { return left < 0; }
};

// Per-dimension interval of a tree cell. Cells are half-open (lo, hi] on
// every dimension that has been cut; lo/hi fall back to the space bounds.
struct CellBounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

// A stratification tree: a recursive binary partition of the covariate
// space together with per-leaf treatment assignment targets.
class StratificationTree {
public:
    StratificationTree() = default;

    // depth-0 tree (one leaf covering the whole space)
    static StratificationTree single_leaf(const CovariateSpace& space, int max_depth,
                                          std::vector<double> pi = {0.5});

    const CovariateSpace& space() const { return space_; }
    int max_depth() const { return max_depth_; }
    void set_max_depth(int L) { max_depth_ = L; }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& nodes() { return nodes_; }
    int root() const { return 0; }
    bool empty() const { return nodes_.empty(); }

    int depth() const;            // realized depth of the root
    int leaf_count() const;
    int num_treatments() const;   // length of leaf pi vectors

    // leaf node indices ordered by label (call canonicalize() first)
    std::vector<int> leaves_in_label_order() const;

    // stratum label of x, in 1..K; throws on out-of-bounds x
    int stratum_of(std::span<const double> x) const;

    CellBounds cell_of(int node_idx) const;

    // Rewrites the tree into its canonical representation: whenever the
    // same partition admits two cut orderings, the lexicographically
    // smallest (dim, threshold) is pulled to the top; leaves are then
    // labeled 1..K left to right.
    void canonicalize();

    // true if every internal cut lies strictly inside its cell and the
    // realized depth respects max_depth
    bool structurally_valid() const;

    // Replaces every node whose cut violates its cell, or that sits at the
    // depth budget, with a leaf. Used by the variation operators to repair
    // trees after structural edits.
    void destroy_invalid_subtrees();

    // leaf -> internal with two fresh leaves (pi copied from the old leaf)
    void split_leaf(int node_idx, const Cut& cut);
    // subtree -> leaf
    void prune_to_leaf(int node_idx);
    // replace the subtree at node_idx with a copy of donor's subtree
    void graft(int node_idx, const StratificationTree& donor, int donor_node_idx);
    // drop unreachable nodes (after prune/graft)
    void compact();

    // deterministic total order on structures; used for tie-breaking
    std::string structural_key() const;

    friend bool operator==(const StratificationTree& a, const StratificationTree& b);

private:
    int depth_below(int idx) const;
    void key_below(int idx, std::string& out) const;

    CovariateSpace space_;
    int max_depth_ = 0;
    std::vector<TreeNode> nodes_;
};

// Per-row stratum labels, 0-based (label - 1).
std::vector<int> stratum_indices(const StratificationTree& tree, const Sample& sample);

// Empirical tree distance: (1/n) sum_i sum_k |1{S1(X_i)=k} - 1{S2(X_i)=k}|
// over the reference sample. Both trees must be canonically labeled and
// have the same leaf count.
double tree_distance(const StratificationTree& t1, const StratificationTree& t2,
                     const Sample& reference);

}  // namespace strattree
