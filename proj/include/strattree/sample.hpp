#pragma once

#include <cstddef>
#include <vector>

#include "strattree/covariate_space.hpp"

namespace strattree {

struct SampleRow {
    double y = 0.0;
    int a = 0;  // treatment label, 0 = control
    std::vector<double> x;
};

// Observed experimental data: rows of (outcome, treatment label, covariates).
// Treatment labels must be 0..J with every arm present at least once.
class Sample {
public:
    Sample() = default;
    Sample(std::vector<SampleRow> rows, const CovariateSpace& space);

    const std::vector<SampleRow>& rows() const { return rows_; }
    const SampleRow& row(std::size_t i) const { return rows_[i]; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const CovariateSpace& space() const { return space_; }

    // number of non-control arms J (labels run 0..J)
    int num_treatments() const { return max_label_; }
    int num_arms() const { return max_label_ + 1; }

    Sample subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<SampleRow> rows_;
    CovariateSpace space_;
    int max_label_ = 0;
};

}  // namespace strattree
