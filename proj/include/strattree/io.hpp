#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "strattree/assign.hpp"
#include "strattree/cv.hpp"
#include "strattree/estimate.hpp"
#include "strattree/sample.hpp"
#include "strattree/search.hpp"
#include "strattree/sim.hpp"
#include "strattree/tree.hpp"

namespace strattree {

inline constexpr const char* kLibraryVersion = "0.1.0";

// malformed user input (CSV/JSON); the CLI maps this to exit code 2
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV layouts: "y,a,x1..xd" (fit/estimate) or "x1..xd" (assign).
struct CsvData {
    std::vector<SampleRow> rows;
    std::size_t d = 0;
    bool has_outcome = false;  // y and a columns present
};

CsvData read_csv(const std::string& path);
void write_sample_csv(const std::string& path, const Sample& sample);

// Continuous space spanning the observed per-dimension ranges.
CovariateSpace infer_space(const CsvData& data);
Sample to_sample(const CsvData& data, const CovariateSpace& space);
std::vector<std::vector<double>> to_covariates(const CsvData& data);

nlohmann::json space_to_json(const CovariateSpace& space);
CovariateSpace space_from_json(const nlohmann::json& j);

nlohmann::json tree_to_json(const StratificationTree& tree);
StratificationTree tree_from_json(const nlohmann::json& j);
void write_tree_json(const std::string& path, const StratificationTree& tree,
                     std::uint64_t seed = 0);
StratificationTree read_tree_json(const std::string& path);

nlohmann::json fit_config_to_json(const FitConfig& config);
nlohmann::json fit_report_to_json(const FitReport& report, const FitConfig& config);
nlohmann::json cv_result_to_json(const CvResult& result, const FitConfig& config);
nlohmann::json estimate_to_json(const EstimateResult& result);
nlohmann::json plan_to_json(const AssignmentPlan& plan);

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

}  // namespace strattree
