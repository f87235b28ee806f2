#include "strattree/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace strattree {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

double parse_double(const std::string& s, std::size_t row, const std::string& col) {
    if (s.empty()) {
        throw InputError("row " + std::to_string(row) + ": missing value in column " + col);
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError("row " + std::to_string(row) + ": cannot parse '" + s + "' in column " +
                         col);
    }
}

}  // namespace

CsvData read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw InputError(path + ": empty file");
    const auto header = split_line(line);

    CsvData data;
    std::size_t first_x = 0;
    if (header.size() >= 2 && header[0] == "y" && header[1] == "a") {
        data.has_outcome = true;
        first_x = 2;
    }
    data.d = header.size() - first_x;
    if (data.d == 0) throw InputError(path + ": no covariate columns");
    for (std::size_t j = 0; j < data.d; ++j) {
        const std::string want = "x" + std::to_string(j + 1);
        if (header[first_x + j] != want) {
            throw InputError(path + ": expected column '" + want + "', found '" +
                             header[first_x + j] + "' (header must be [y,a,]x1..xd)");
        }
    }

    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        row_no++;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw InputError("row " + std::to_string(row_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        SampleRow r;
        if (data.has_outcome) {
            r.y = parse_double(fields[0], row_no, "y");
            const double a = parse_double(fields[1], row_no, "a");
            if (a != std::floor(a) || a < 0.0) {
                throw InputError("row " + std::to_string(row_no) +
                                 ": treatment label must be a nonnegative integer");
            }
            r.a = static_cast<int>(a);
        }
        r.x.reserve(data.d);
        for (std::size_t j = 0; j < data.d; ++j) {
            r.x.push_back(parse_double(fields[first_x + j], row_no, "x" + std::to_string(j + 1)));
        }
        data.rows.push_back(std::move(r));
    }
    if (data.rows.empty()) throw InputError(path + ": no data rows");
    return data;
}

void write_sample_csv(const std::string& path, const Sample& sample) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    const std::size_t d = sample.space().num_dims();
    out << "y,a";
    for (std::size_t j = 0; j < d; ++j) out << ",x" << j + 1;
    out << "\n";
    char buf[32];
    for (const auto& r : sample.rows()) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.y);
        out << buf << "," << r.a;
        for (double x : r.x) {
            std::snprintf(buf, sizeof(buf), "%.17g", x);
            out << "," << buf;
        }
        out << "\n";
    }
}

CovariateSpace infer_space(const CsvData& data) {
    std::vector<DimensionSpec> dims(data.d);
    for (std::size_t j = 0; j < data.d; ++j) {
        double lo = data.rows[0].x[j], hi = lo;
        for (const auto& r : data.rows) {
            lo = std::min(lo, r.x[j]);
            hi = std::max(hi, r.x[j]);
        }
        dims[j] = DimensionSpec{DimKind::Continuous, lo, hi, {}};
    }
    return CovariateSpace(std::move(dims));
}

Sample to_sample(const CsvData& data, const CovariateSpace& space) {
    if (!data.has_outcome) throw InputError("CSV lacks y/a columns required here");
    try {
        return Sample(data.rows, space);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    } catch (const std::domain_error& e) {
        throw InputError(e.what());
    }
}

std::vector<std::vector<double>> to_covariates(const CsvData& data) {
    std::vector<std::vector<double>> xs;
    xs.reserve(data.rows.size());
    for (const auto& r : data.rows) xs.push_back(r.x);
    return xs;
}

nlohmann::json space_to_json(const CovariateSpace& space) {
    nlohmann::json dims = nlohmann::json::array();
    for (std::size_t j = 0; j < space.num_dims(); ++j) {
        const auto& d = space.dim(j);
        nlohmann::json e;
        if (d.kind == DimKind::Discrete) {
            e["kind"] = "discrete";
            e["support"] = d.support;
        } else {
            e["kind"] = "continuous";
            e["lower"] = d.lower;
            e["upper"] = d.upper;
        }
        dims.push_back(std::move(e));
    }
    return dims;
}

CovariateSpace space_from_json(const nlohmann::json& j) {
    std::vector<DimensionSpec> dims;
    for (const auto& e : j) {
        DimensionSpec d;
        if (e.at("kind") == "discrete") {
            d.kind = DimKind::Discrete;
            d.support = e.at("support").get<std::vector<double>>();
            if (!d.support.empty()) {
                d.lower = *std::min_element(d.support.begin(), d.support.end());
                d.upper = *std::max_element(d.support.begin(), d.support.end());
            }
        } else {
            d.kind = DimKind::Continuous;
            d.lower = e.at("lower").get<double>();
            d.upper = e.at("upper").get<double>();
        }
        dims.push_back(std::move(d));
    }
    return CovariateSpace(std::move(dims));
}

namespace {

nlohmann::json node_to_json(const StratificationTree& tree, int idx) {
    const auto& n = tree.nodes()[static_cast<std::size_t>(idx)];
    nlohmann::json j;
    if (n.is_leaf()) {
        j["leaf"] = n.label;
        j["pi"] = n.pi;
    } else {
        j["cut"] = {{"dim", n.cut.dim + 1}, {"threshold", n.cut.threshold}};
        j["left"] = node_to_json(tree, n.left);
        j["right"] = node_to_json(tree, n.right);
    }
    return j;
}

int node_from_json(StratificationTree& tree, int idx, const nlohmann::json& j) {
    if (j.contains("cut")) {
        const auto& c = j.at("cut");
        tree.split_leaf(idx, Cut{c.at("dim").get<int>() - 1, c.at("threshold").get<double>()});
        const int l = tree.nodes()[static_cast<std::size_t>(idx)].left;
        const int r = tree.nodes()[static_cast<std::size_t>(idx)].right;
        node_from_json(tree, l, j.at("left"));
        node_from_json(tree, r, j.at("right"));
    } else {
        tree.nodes()[static_cast<std::size_t>(idx)].pi = j.at("pi").get<std::vector<double>>();
    }
    return idx;
}

}  // namespace

nlohmann::json tree_to_json(const StratificationTree& tree) {
    nlohmann::json j;
    j["schema"] = "stratification-tree-v1";
    j["max_depth"] = tree.max_depth();
    j["space"] = space_to_json(tree.space());
    j["root"] = node_to_json(tree, tree.root());
    return j;
}

StratificationTree tree_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "stratification-tree-v1") {
        throw InputError("unrecognized tree schema");
    }
    auto space = space_from_json(j.at("space"));
    auto tree = StratificationTree::single_leaf(space, j.at("max_depth").get<int>());
    node_from_json(tree, 0, j.at("root"));
    tree.canonicalize();
    return tree;
}

void write_tree_json(const std::string& path, const StratificationTree& tree, std::uint64_t seed) {
    auto j = tree_to_json(tree);
    j["version"] = kLibraryVersion;
    j["seed"] = seed;
    write_json(path, j);
}

StratificationTree read_tree_json(const std::string& path) {
    return tree_from_json(read_json(path));
}

nlohmann::json fit_config_to_json(const FitConfig& config) {
    return {{"max_depth", config.max_depth},
            {"nu", config.nu},
            {"min_cell_per_arm", config.min_cell_per_arm},
            {"population", config.ea.population},
            {"max_iterations", config.ea.max_iterations},
            {"patience", config.ea.patience},
            {"tolerance", config.ea.tolerance},
            {"seed", config.ea.seed}};
}

nlohmann::json fit_report_to_json(const FitReport& report, const FitConfig& config) {
    nlohmann::json j;
    j["schema"] = "fit-report-v1";
    j["version"] = kLibraryVersion;
    j["config"] = fit_config_to_json(config);
    j["objective"] = report.objective;
    j["generations"] = report.generations;
    j["terminated"] = report.terminated;
    j["trace"] = report.trace;
    if (report.all_infinite) {
        j["warning"] = "no tree reached a finite objective; returned the depth-0 tree";
    }
    return j;
}

nlohmann::json cv_result_to_json(const CvResult& result, const FitConfig& config) {
    nlohmann::json j;
    j["schema"] = "cv-report-v1";
    j["version"] = kLibraryVersion;
    j["config"] = fit_config_to_json(config);
    j["folds"] = result.report.folds;
    j["criterion"] = result.report.criterion;
    j["chosen_depth"] = result.report.chosen_depth;
    j["refit_objective"] = result.refit_report.objective;
    return j;
}

nlohmann::json estimate_to_json(const EstimateResult& result) {
    nlohmann::json strata = nlohmann::json::array();
    for (const auto& s : result.strata) {
        strata.push_back({{"label", s.label},
                          {"n", s.n},
                          {"n1", s.n1},
                          {"beta", s.beta},
                          {"var1", s.var1},
                          {"var0", s.var0}});
    }
    return {{"schema", "estimate-v1"},
            {"version", kLibraryVersion},
            {"theta_hat", result.theta_hat},
            {"v_hat", result.v_hat},
            {"v_h", result.v_h},
            {"v_y", result.v_y},
            {"se", result.se()},
            {"ci_low", result.ci_low},
            {"ci_high", result.ci_high},
            {"level", result.level},
            {"n", result.n},
            {"strata", std::move(strata)}};
}

nlohmann::json plan_to_json(const AssignmentPlan& plan) {
    return {{"schema", "assignment-v1"},
            {"version", kLibraryVersion},
            {"procedure", plan.procedure},
            {"seed", plan.seed},
            {"strata", plan.strata},
            {"treatments", plan.treatments},
            {"stratum_sizes", plan.stratum_sizes},
            {"arm_counts", plan.arm_counts}};
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::string out =
        "method,coverage,delta_length,power,delta_rmse,avg_length,rmse,coverage_se,power_se,"
        "rmse_se,reps\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.6g,%.6g,%.4f,%.4f,%.6g,%d\n",
                      r.method.c_str(), r.coverage, r.delta_length, r.power, r.delta_rmse,
                      r.avg_length, r.rmse, r.coverage_se, r.power_se, r.rmse_se, r.reps);
        out += buf;
    }
    return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace strattree
