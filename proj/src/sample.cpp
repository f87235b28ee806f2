#include "strattree/sample.hpp"

#include <stdexcept>
#include <string>

namespace strattree {

Sample::Sample(std::vector<SampleRow> rows, const CovariateSpace& space)
    : rows_(std::move(rows)), space_(space) {
    int max_label = -1;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        const auto& r = rows_[i];
        if (r.a < 0) {
            throw std::invalid_argument("row " + std::to_string(i + 1) + ": negative treatment label");
        }
        space_.require_inside(r.x);
        if (r.a > max_label) max_label = r.a;
    }
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_label + 1), 0);
    for (const auto& r : rows_) counts[static_cast<std::size_t>(r.a)]++;
    for (std::size_t a = 0; a < counts.size(); ++a) {
        if (counts[a] == 0) {
            throw std::invalid_argument("treatment labels must be contiguous from 0; no rows with label " +
                                        std::to_string(a));
        }
    }
    max_label_ = max_label < 0 ? 0 : max_label;
}

Sample Sample::subset(const std::vector<std::size_t>& indices) const {
    std::vector<SampleRow> rows;
    rows.reserve(indices.size());
    for (std::size_t i : indices) rows.push_back(rows_[i]);
    return Sample(std::move(rows), space_);
}

}  // namespace strattree
