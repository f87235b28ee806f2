#pragma once

#include <vector>

#include "strattree/search.hpp"

namespace strattree {

struct CvReport {
    std::vector<double> criterion;  // index L -> cross-validated objective
    int chosen_depth = 0;
    int folds = 2;
    // per depth: the tree fitted on each fold and its cross-fold objective
    struct FoldFit {
        StratificationTree tree;
        double cross_objective = kInfiniteObjective;
    };
    std::vector<std::vector<FoldFit>> fold_fits;  // [depth][fold]
};

struct CvResult {
    StratificationTree tree;  // refit on the full pilot at the chosen depth
    CvReport report;
    FitReport refit_report;
};

// Cross-validated depth selection over L = 0..max_depth, followed by a
// full-pilot refit at the chosen depth. folds defaults to the 2-fold
// scheme; the fold split is a seeded shuffle of the row order.
CvResult cv_fit(const Sample& pilot, int max_depth, const FitConfig& config, int folds = 2);

}  // namespace strattree
