// menulab: command-line front end for the mechanism-design toolkit.

#include "menulab/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace menulab;

namespace {

enum Exit { kOk = 0, kAssertion = 1, kConfig = 2, kSolver = 3 };

fs::path out_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("MENULAB_OUT_DIR"); env && *env) return env;
    return "menulab-out";
}

void print_config_error(const ConfigError& e, const std::string& source) {
    std::cerr << "config error";
    if (!source.empty()) std::cerr << " in " << source;
    if (e.line() > 0) std::cerr << " at line " << e.line() << ", column " << e.column();
    std::cerr << ": " << e.what() << '\n';
}

int cmd_run(const std::string& path, const fs::path& dir, bool parallel) {
    scenario::Config cfg;
    try {
        cfg = scenario::load_config(path);
    } catch (const ConfigError& e) {
        print_config_error(e, path);
        return kConfig;
    }
    scenario::RunOptions opt;
    opt.out_dir = dir;
    opt.parallel = parallel;
    const auto report = scenario::run(cfg, opt);
    for (const auto& sc : report.scenarios) {
        for (const auto& ex : sc.experiments) {
            std::cout << sc.id << ' ' << ex.name << ": " << scenario::to_string(ex.status) << '\n';
            for (const auto& c : ex.checks) {
                if (!c.passed) std::cout << "  FAILED " << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << '\n';
            }
            for (const auto& n : ex.notes) {
                std::cout << "  note: " << n << '\n';
                if (ex.status == scenario::Status::solver_error) std::cerr << "solver error in scenario " << sc.id << ": " << n << '\n';
            }
        }
    }
    std::cout << "report: " << (dir / "report.json").string() << '\n';
    return report.exit_code();
}

ProductDistribution parse_pair(const std::string& dx, const std::string& dy) {
    return {scenario::parse_density_arg(dx), scenario::parse_density_arg(dy)};
}

int cmd_solve(const std::string& dx, const std::string& dy, int n, bool unit_demand, const fs::path& dir) {
    const auto d = parse_pair(dx, dy);
    if (n < 2 || n > kDefaultMaxTypesPerAxis) throw ConfigError("--n must lie in [2, 40]");
    fs::create_directories(dir);
    const auto inst = discretize(d, n);
    SolveOptions opt;
    opt.unit_demand = unit_demand;
    const auto gm = solve_optimal(inst, opt);
    const auto clusters = cluster_menu(gm, ToleranceConfig{}.clustering_tol);
    std::cout << "revenue " << io::fmt(gm.expected_payment()) << '\n';
    std::cout << "menu (" << clusters.size() << " items incl. null)\n";
    io::write_clusters(std::cout, clusters);
    std::ofstream mech(dir / "mechanism.csv", std::ios::binary);
    io::write_mechanism(mech, gm);
    std::ofstream menu(dir / "menu.csv", std::ios::binary);
    io::write_clusters(menu, clusters);
    return kOk;
}

int cmd_audit(const std::string& dx, const std::string& dy, int n, const std::string& id, const fs::path& dir) {
    const auto d = parse_pair(dx, dy);
    if (n < 2 || n > kDefaultMaxTypesPerAxis) throw ConfigError("--n must lie in [2, 40]");
    fs::create_directories(dir);
    const auto rep = audit_ratios(d, n, {}, id);
    write_baseline_header(std::cout);
    write_baseline_row(std::cout, rep);
    for (const auto& c : rep.checks) {
        if (!c.applicable) continue;
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << io::fmt(c.lhs) << " vs " << io::fmt(c.rhs)
                  << '\n';
    }
    std::ofstream os(dir / "baselines.csv", std::ios::binary);
    write_baseline_header(os);
    write_baseline_row(os, rep);
    return rep.all_passed() ? kOk : kAssertion;
}

int cmd_check_conditions(const std::string& dx, const std::string& dy, int grid) {
    const auto d = parse_pair(dx, dy);
    io::CsvWriter w(std::cout);
    w.header({"condition", "holds", "worst_margin", "worst_x", "worst_y"});
    for (int c = 1; c <= 5; ++c) {
        const auto r = check_condition(d, c, grid);
        w.cell(c).cell(r.holds).cell(r.worst_margin);
        if (r.worst_x && r.worst_y) w.cell(*r.worst_x).cell(*r.worst_y);
        else w.cell("").cell("");
        w.end_row();
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"menulab: optimal two-item mechanisms, menu structure and baselines"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    std::string out;
    app.add_option("-o,--out", out, "Artifact directory (default: $MENULAB_OUT_DIR or ./menulab-out)");

    std::string config;
    bool parallel = false;
    auto* run = app.add_subcommand("run", "Run every experiment of a scenario config");
    run->add_option("config", config, "JSON scenario file")->required();
    run->add_flag("--parallel", parallel, "Run scenarios concurrently");

    std::string dx, dy, id = "cli";
    int n = 9;
    int grid = 64;
    bool unit_demand = false;
    auto density_opts = [&](CLI::App* sub) {
        sub->add_option("--dx", dx, "Density of item 1, e.g. uniform:0:1 or power:-2:1:2")->required();
        sub->add_option("--dy", dy, "Density of item 2")->required();
    };
    auto* solve = app.add_subcommand("solve", "Solve the discretized LP and print the menu");
    density_opts(solve);
    solve->add_option("--n", n, "Types per axis")->capture_default_str();
    solve->add_flag("--unit-demand", unit_demand, "Constrain q1 + q2 <= 1");

    auto* audit = app.add_subcommand("audit", "Compare the LP optimum with separate sale and bundling");
    density_opts(audit);
    audit->add_option("--n", n, "Types per axis")->capture_default_str();
    audit->add_option("--id", id, "Scenario id for the CSV row")->capture_default_str();

    auto* cond = app.add_subcommand("check-conditions", "Evaluate the five power-rate conditions");
    density_opts(cond);
    cond->add_option("--grid", grid, "Check grid per axis")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    const auto dir = out_dir(out);
    try {
        if (*run) return cmd_run(config, dir, parallel);
        if (*solve) return cmd_solve(dx, dy, n, unit_demand, dir);
        if (*audit) return cmd_audit(dx, dy, n, id, dir);
        if (*cond) return cmd_check_conditions(dx, dy, grid);
    } catch (const ConfigError& e) {
        print_config_error(e, {});
        return kConfig;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kAssertion;
    }
    return kOk;
}
