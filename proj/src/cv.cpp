#include "strattree/cv.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace strattree {

CvResult cv_fit(const Sample& pilot, int max_depth, const FitConfig& config, int folds) {
    config.validate();
    if (folds < 2) throw std::invalid_argument("cv_fit needs at least 2 folds");
    if (pilot.size() < static_cast<std::size_t>(2 * folds)) {
        throw std::invalid_argument("pilot too small for " + std::to_string(folds) + "-fold CV");
    }

    // seeded shuffle, then contiguous chunks; with 2 folds the first chunk
    // holds ceil(m/2) rows
    std::vector<std::size_t> order(pilot.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(config.ea.seed, 0x5Cu));
    shuffle_rng.shuffle(order);

    const std::size_t m = pilot.size();
    std::vector<std::vector<std::size_t>> chunks(static_cast<std::size_t>(folds));
    {
        const std::size_t base = m / static_cast<std::size_t>(folds);
        const std::size_t extra = m % static_cast<std::size_t>(folds);
        std::size_t pos = 0;
        for (std::size_t v = 0; v < chunks.size(); ++v) {
            const std::size_t len = base + (v < extra ? 1 : 0);
            chunks[v].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                             order.begin() + static_cast<std::ptrdiff_t>(pos + len));
            pos += len;
        }
    }

    std::vector<Sample> fold_samples;       // evaluation folds
    std::vector<Sample> complement_samples; // training data per fold
    for (std::size_t v = 0; v < chunks.size(); ++v) {
        std::vector<std::size_t> complement;
        for (std::size_t w = 0; w < chunks.size(); ++w) {
            if (w == v) continue;
            complement.insert(complement.end(), chunks[w].begin(), chunks[w].end());
        }
        try {
            fold_samples.push_back(pilot.subset(chunks[v]));
            complement_samples.push_back(pilot.subset(complement));
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(
                "a CV fold is missing a treatment arm; use a different seed or a larger pilot");
        }
    }

    // evaluation applies the paper's empty-cell rule: a cell with no
    // observations (or an empty arm) in the evaluation fold scores infinity
    FitConfig eval_config = config;
    eval_config.min_cell_per_arm = 1;

    CvReport report;
    report.folds = folds;
    report.criterion.assign(static_cast<std::size_t>(max_depth) + 1, 0.0);
    report.fold_fits.resize(static_cast<std::size_t>(max_depth) + 1);

    for (int depth = 0; depth <= max_depth; ++depth) {
        double acc = 0.0;
        auto& fits = report.fold_fits[static_cast<std::size_t>(depth)];
        for (std::size_t v = 0; v < chunks.size(); ++v) {
            FitConfig fold_config = config;
            fold_config.max_depth = depth;
            fold_config.ea.seed = derive_seed(config.ea.seed, 0xCF00u + static_cast<std::uint64_t>(depth), v);
            auto fitted = fit(complement_samples[v], fold_config);
            const double cross = empirical_variance(fitted.tree, fold_samples[v], eval_config);
            fits.push_back({fitted.tree, cross});
            acc += cross;
        }
        report.criterion[static_cast<std::size_t>(depth)] =
            acc / static_cast<double>(folds);
    }

    // smallest argmin
    int chosen = 0;
    for (int depth = 1; depth <= max_depth; ++depth) {
        if (report.criterion[static_cast<std::size_t>(depth)] <
            report.criterion[static_cast<std::size_t>(chosen)]) {
            chosen = depth;
        }
    }
    report.chosen_depth = chosen;

    FitConfig final_config = config;
    final_config.max_depth = chosen;
    auto refit = fit(pilot, final_config);

    CvResult result;
    result.tree = refit.tree;
    result.refit_report = std::move(refit);
    result.report = std::move(report);
    return result;
}

}  // namespace strattree
