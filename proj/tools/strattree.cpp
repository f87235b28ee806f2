#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "strattree/io.hpp"
#include "strattree/multi.hpp"

namespace st = strattree;

namespace {

struct Options {
    std::string pilot_csv, data_csv, tree_json, out_path, report_path, methods;
    int depth = 3;
    int folds = 2;
    int reps = 500;
    int model = 1;
    int threads = 0;
    int arms = 1;
    std::size_t population = 200;
    std::size_t pilot_n = 500;
    std::size_t main_n = 4500;
    std::uint64_t seed = 0;
    double nu = 0.1;
    double level = 0.95;
    std::string procedure = "sbr";
    std::size_t oracle_budget = 10'000'000;
};

st::FitConfig make_fit_config(const Options& o) {
    st::FitConfig c;
    c.max_depth = o.depth;
    c.nu = o.nu;
    c.ea.population = o.population;
    c.ea.seed = o.seed;
    if (o.arms > 1) c = st::with_multi_objective(c);
    return c;
}

void add_fit_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--depth", o.depth, "maximum tree depth")->capture_default_str();
    cmd->add_option("--nu", o.nu, "assignment proportion clip")->capture_default_str();
    cmd->add_option("--population", o.population, "search population size")->capture_default_str();
    cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
    cmd->add_option("--arms", o.arms, "number of treated arms J")->capture_default_str();
}

int cmd_fit(const Options& o, bool cv) {
    const auto csv = st::read_csv(o.pilot_csv);
    const auto pilot = st::to_sample(csv, st::infer_space(csv));
    const auto config = make_fit_config(o);

    st::StratificationTree tree;
    nlohmann::json report;
    if (cv) {
        auto result = st::cv_fit(pilot, o.depth, config, o.folds);
        tree = result.tree;
        report = st::cv_result_to_json(result, config);
    } else {
        auto result = st::fit(pilot, config);
        tree = result.tree;
        report = st::fit_report_to_json(result, config);
        if (result.all_infinite) {
            std::cerr << "warning: " << report["warning"].get<std::string>() << "\n";
        }
    }
    st::write_tree_json(o.out_path, tree, o.seed);
    if (!o.report_path.empty()) st::write_json(o.report_path, report);
    return 0;
}

int cmd_assign(const Options& o) {
    const auto tree = st::read_tree_json(o.tree_json);
    const auto csv = st::read_csv(o.data_csv);
    const auto xs = st::to_covariates(csv);
    st::AssignmentPlan plan;
    if (o.procedure == "sbr") {
        plan = st::assign_sbr(tree, xs, o.seed);
    } else if (o.procedure == "simple") {
        plan = st::assign_simple(tree, xs, o.seed);
    } else {
        throw st::InputError("unknown procedure '" + o.procedure + "' (sbr | simple)");
    }
    st::write_json(o.out_path, st::plan_to_json(plan));
    return 0;
}

int cmd_estimate(const Options& o) {
    const auto tree = st::read_tree_json(o.tree_json);
    const auto csv = st::read_csv(o.data_csv);
    const auto wave2 = st::to_sample(csv, tree.space());

    nlohmann::json out;
    out["schema"] = "estimate-run-v1";
    out["version"] = st::kLibraryVersion;
    out["level"] = o.level;
    if (o.arms > 1) {
        const auto r = st::estimate_ate_multi(tree, wave2, o.level);
        out["theta_hat"] = r.theta_hat;
        out["v_hat"] = r.v_hat.data;
        out["ci_low"] = r.ci_low;
        out["ci_high"] = r.ci_high;
        out["n"] = r.n;
    } else {
        const auto est = st::estimate_ate(tree, wave2, o.level);
        out["wave2"] = st::estimate_to_json(est);
        if (!o.pilot_csv.empty()) {
            const auto pcsv = st::read_csv(o.pilot_csv);
            const auto pilot = st::to_sample(pcsv, tree.space());
            auto flat = st::StratificationTree::single_leaf(tree.space(), 0);
            const auto pest = st::estimate_ate(flat, pilot, o.level);
            out["pilot"] = st::estimate_to_json(pest);
            out["pooled"] = st::estimate_to_json(st::estimate_pooled(pest, est));
        }
    }
    if (o.out_path.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        st::write_json(o.out_path, out);
    }
    return 0;
}

int cmd_simulate(const Options& o) {
    const auto dgp = st::DgpSpec::by_id(o.model);
    st::StudyConfig sc;
    sc.pilot_n = o.pilot_n;
    sc.main_n = o.main_n;
    sc.reps = o.reps;
    sc.level = o.level;
    sc.seed = o.seed;
    sc.threads = o.threads;
    sc.fit = make_fit_config(o);
    std::vector<std::string> methods;
    std::stringstream ss(o.methods);
    std::string item;
    while (std::getline(ss, item, ',')) methods.push_back(item);
    const auto rows = st::run_study(dgp, methods, sc);
    std::cout << st::format_metrics(rows);
    if (!o.out_path.empty()) {
        std::ofstream out(o.out_path);
        if (!out) throw st::InputError("cannot open " + o.out_path + " for writing");
        out << st::metrics_to_csv(rows);
    }
    return 0;
}

int cmd_oracle(const Options& o) {
    const auto csv = st::read_csv(o.pilot_csv);
    const auto pilot = st::to_sample(csv, st::infer_space(csv));
    const auto config = make_fit_config(o);
    const auto grid = st::build_split_grid(pilot, config);
    const auto result = st::exhaustive_search(pilot, o.depth, grid, config, o.oracle_budget);
    st::write_tree_json(o.out_path, result.tree, o.seed);
    if (!o.report_path.empty()) {
        st::write_json(o.report_path, {{"schema", "oracle-report-v1"},
                                       {"version", st::kLibraryVersion},
                                       {"objective", result.objective},
                                       {"trees_evaluated", result.trees_evaluated},
                                       {"config", st::fit_config_to_json(config)}});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-wave adaptive randomization via stratification trees"};
    app.require_subcommand(1);
    Options o;

    auto* fit = app.add_subcommand("fit", "fit a stratification tree on pilot data");
    fit->add_option("--pilot", o.pilot_csv, "pilot CSV (y,a,x1..xd)")->required();
    fit->add_option("--out", o.out_path, "output tree JSON")->required();
    fit->add_option("--report", o.report_path, "output fit report JSON");
    add_fit_flags(fit, o);

    auto* cvf = app.add_subcommand("cv-fit", "cross-validated depth selection, then fit");
    cvf->add_option("--pilot", o.pilot_csv, "pilot CSV (y,a,x1..xd)")->required();
    cvf->add_option("--out", o.out_path, "output tree JSON")->required();
    cvf->add_option("--report", o.report_path, "output CV report JSON");
    cvf->add_option("--folds", o.folds, "number of folds")->capture_default_str();
    add_fit_flags(cvf, o);

    auto* asg = app.add_subcommand("assign", "assign treatment for a new wave");
    asg->add_option("--tree", o.tree_json, "tree JSON")->required();
    asg->add_option("--covariates", o.data_csv, "wave CSV (x1..xd)")->required();
    asg->add_option("--out", o.out_path, "output plan JSON")->required();
    asg->add_option("--procedure", o.procedure, "sbr | simple")->capture_default_str();
    asg->add_option("--seed", o.seed, "random seed")->capture_default_str();

    auto* est = app.add_subcommand("estimate", "estimate the treatment effect");
    est->add_option("--tree", o.tree_json, "tree JSON")->required();
    est->add_option("--data", o.data_csv, "wave-2 CSV (y,a,x1..xd)")->required();
    est->add_option("--pilot", o.pilot_csv, "pilot CSV for the pooled estimate");
    est->add_option("--out", o.out_path, "output JSON (default stdout)");
    est->add_option("--level", o.level, "confidence level")->capture_default_str();
    est->add_option("--arms", o.arms, "number of treated arms J")->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study of stratification methods");
    sim->add_option("--model", o.model, "DGP model id (1 | 2 | 3)")->capture_default_str();
    sim->add_option("--pilot", o.pilot_n, "pilot size")->capture_default_str();
    sim->add_option("--main", o.main_n, "main wave size")->capture_default_str();
    sim->add_option("--reps", o.reps, "Monte Carlo replications")->capture_default_str();
    sim->add_option("--level", o.level, "confidence level")->capture_default_str();
    sim->add_option("--threads", o.threads, "worker threads (0 = auto)")->capture_default_str();
    sim->add_option("--out", o.out_path, "output metrics CSV");
    o.methods = "none,adhoc,strat_tree,cv_tree,infeasible";
    sim->add_option("--methods", o.methods, "comma-separated methods")->capture_default_str();
    add_fit_flags(sim, o);

    auto* orc = app.add_subcommand("oracle", "exhaustive search over the split grid");
    orc->add_option("--pilot", o.pilot_csv, "pilot CSV (y,a,x1..xd)")->required();
    orc->add_option("--out", o.out_path, "output tree JSON")->required();
    orc->add_option("--report", o.report_path, "output report JSON");
    orc->add_option("--budget", o.oracle_budget, "candidate tree budget")->capture_default_str();
    add_fit_flags(orc, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(fit)) return cmd_fit(o, false);
        if (app.got_subcommand(cvf)) return cmd_fit(o, true);
        if (app.got_subcommand(asg)) return cmd_assign(o);
        if (app.got_subcommand(est)) return cmd_estimate(o);
        if (app.got_subcommand(sim)) return cmd_simulate(o);
        if (app.got_subcommand(orc)) return cmd_oracle(o);
    } catch (const st::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
