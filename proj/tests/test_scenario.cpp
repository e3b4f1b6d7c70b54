#include "menulab/scenario.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace menulab;
using namespace menulab::scenario;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("menulab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string one_scenario(const std::string& dx, const std::string& extra = {}, const std::string& exps = "[]") {
    return R"({"schema_version": 1, "scenarios": [{"id": "s", "dx": )" + dx +
           R"(, "dy": {"kind": "uniform", "support": [0, 1]}, "grid_n": 5, "experiments": )" + exps + extra + "}]}";
}

ConfigError parse_error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    ADD_FAILURE() << "no ConfigError for: " << text;
    return ConfigError("none");
}

const ExperimentResult& find(const RunReport& r, const std::string& id, const std::string& name) {
    for (const auto& s : r.scenarios)
        if (s.id == id)
            for (const auto& e : s.experiments)
                if (e.name == name) return e;
    throw std::runtime_error("missing experiment " + id + "/" + name);
}

}  // namespace

TEST(Fnv1a, KnownVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(ParseConfig, FullSchema) {
    const std::string text = R"({
  "schema_version": 1,
  "settings": {"clustering_tol": 0.01, "restarts": 9, "constructive_grid": 17},
  "scenarios": [
    {"id": "lo", "dx": {"kind": "power", "params": {"b": -2}, "support": [1, 2]},
     "dy": {"kind": "truncated_exponential", "params": {"lambda": 2}, "support": [1, 3]},
     "grid_n": 7, "unit_demand": true,
     "experiments": ["solve", "analyze", {"fosd_pair": "hi"}, {"parametric": "unit_demand_five"}]},
    {"id": "hi", "dx": {"kind": "tabulated", "params": {"values": [1, 2, 3, 4]}, "support": [0, 1]},
     "dy": {"kind": "poly_exp", "params": {"coeffs": [1, 1], "exp_coeffs": [0, -1]}, "support": [0, 1]},
     "grid_n": 5, "experiments": []}
  ]
})";
    const auto cfg = parse_config(text);
    EXPECT_EQ(cfg.settings.clustering_tol, 0.01);
    EXPECT_EQ(cfg.settings.restarts, 9);
    EXPECT_EQ(cfg.settings.constructive_grid, 17);
    ASSERT_EQ(cfg.scenarios.size(), 2u);
    const auto& lo = cfg.scenarios[0];
    EXPECT_TRUE(lo.unit_demand);
    EXPECT_EQ(lo.grid_n, 7);
    EXPECT_EQ(lo.d.dx.kind(), DensityKind::power);
    EXPECT_EQ(lo.d.dy.kind(), DensityKind::truncated_exponential);
    ASSERT_EQ(lo.experiments.size(), 4u);
    EXPECT_EQ(lo.experiments[2].kind, ExperimentKind::fosd_pair);
    EXPECT_EQ(lo.experiments[2].arg, "hi");
    EXPECT_EQ(lo.experiments[3].label(), "parametric(unit_demand_five)");
    EXPECT_EQ(cfg.scenarios[1].d.dy.kind(), DensityKind::poly_exp);
    EXPECT_EQ(cfg.hash, fnv1a_hex(text));
    EXPECT_NE(cfg.find("hi"), nullptr);
    EXPECT_EQ(cfg.find("nope"), nullptr);
}

TEST(ParseConfig, ErrorsCarryLineAndColumn) {
    const std::string text = "{\n  \"schema_version\": 1,\n  \"scenarios\": [\n    {\"id\": \"a\",\n"
                             "     \"dx\": {\"kind\": \"uniform\", \"support\": [0, 1]},\n"
                             "     \"dy\": {\"kind\": \"gamma\", \"support\": [0, 1]},\n"
                             "     \"grid_n\": 5, \"experiments\": []}\n  ]\n}\n";
    const auto e = parse_error_of(text);
    EXPECT_EQ(e.pointer(), "/scenarios/0/dy/kind");
    EXPECT_EQ(e.line(), 6);
    EXPECT_EQ(e.column(), 13);
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);

    const auto syntax = parse_error_of("{\n  \"schema_version\": 1,\n  \"scenarios\": [ 3, ]\n}");
    EXPECT_EQ(syntax.line(), 3);
    EXPECT_GT(syntax.column(), 1);

    const auto array_item = parse_error_of("{\"schema_version\": 1,\n\"scenarios\": [\n  7]}");
    EXPECT_EQ(array_item.pointer(), "/scenarios/0");
    EXPECT_EQ(array_item.line(), 3);
    EXPECT_EQ(array_item.column(), 3);
}

TEST(ParseConfig, RejectsInvalidContent) {
    const std::string u = R"({"kind": "uniform", "support": [0, 1]})";
    const std::vector<std::string> bad{
        R"({"schema_version": 2, "scenarios": []})",
        R"({"scenarios": []})",
        R"({"schema_version": 1, "scenarios": [], "extra": 1})",
        R"({"schema_version": 1, "settings": {"restarts": 4}, "scenarios": []})",
        one_scenario(R"({"kind": "uniform", "support": [1, 0]})"),
        one_scenario(R"({"kind": "uniform", "support": [0, 1], "colour": 1})"),
        one_scenario(R"({"kind": "power", "support": [1, 2]})"),
        one_scenario(u, R"(, "grid_n": 99)"),
        one_scenario(u, {}, R"(["solve", "fly"])"),
        one_scenario(u, {}, R"([{"fosd_pair": "ghost"}])"),
        one_scenario(u, {}, R"([{"parametric": "seven_item"}])"),
        one_scenario(u, {}, R"(["fosd_pair"])"),
        R"({"schema_version": 1, "scenarios": [{"id": "bad/id", "dx": {}, "dy": {}, "grid_n": 5, "experiments": []}]})",
    };
    for (const auto& text : bad) {
        const auto e = parse_error_of(text);
        EXPECT_GE(e.line(), 1) << text;
        EXPECT_GE(e.column(), 1) << text;
    }
    const std::string dup = R"({"schema_version": 1, "scenarios": [)"
                            R"({"id": "x", "dx": )" + u + R"(, "dy": )" + u + R"(, "grid_n": 3, "experiments": []},)"
                            R"({"id": "x", "dx": )" + u + R"(, "dy": )" + u + R"(, "grid_n": 3, "experiments": []}]})";
    EXPECT_EQ(parse_error_of(dup).pointer(), "/scenarios/1/id");
}

TEST(ParseDensityArg, ColonAndJsonForms) {
    EXPECT_EQ(parse_density_arg("uniform:0:1"), Density1D::uniform(0, 1));
    EXPECT_EQ(parse_density_arg("power:-2:1:2"), Density1D::power(-2, 1, 2));
    EXPECT_EQ(parse_density_arg("power:-2:1:2:3"), Density1D::power(-2, 1, 2, 3));
    EXPECT_EQ(parse_density_arg("texp:2:1:3"), Density1D::truncated_exponential(2, 1, 3));
    EXPECT_EQ(parse_density_arg(R"({"kind": "uniform", "support": [1.2, 2.2]})"), Density1D::uniform(1.2, 2.2));
    EXPECT_THROW(parse_density_arg("uniform:0"), ConfigError);
    EXPECT_THROW(parse_density_arg("uniform:a:b"), ConfigError);
    EXPECT_THROW(parse_density_arg("uniform:1:0"), ConfigError);
    EXPECT_THROW(parse_density_arg("{broken"), ConfigError);
}

TEST(Run, EmptyExperimentListGivesEmptyReport) {
    const auto dir = fresh_dir("empty");
    const auto cfg = parse_config(one_scenario(R"({"kind": "uniform", "support": [0, 1]})"));
    const auto rep = run(cfg, {dir, false});
    EXPECT_EQ(rep.experiment_count(), 0u);
    EXPECT_EQ(rep.exit_code(), 0);
    const auto j = json::parse(slurp(dir / "report.json"));
    EXPECT_EQ(j["experiment_count"], 0);
    EXPECT_EQ(j["version"], "0.1.0");
    EXPECT_EQ(j["config_hash"], cfg.hash);
    EXPECT_FALSE(fs::exists(dir / "baselines.csv"));
}

TEST(Run, UniformSolveAnalyzeAndDeterminism) {
    const std::string text = R"({"schema_version": 1, "scenarios": [
      {"id": "u", "dx": {"kind": "uniform", "support": [0, 1]}, "dy": {"kind": "uniform", "support": [0, 1]},
       "grid_n": 9, "experiments": ["solve", "analyze", "audit"]},
      {"id": "p", "dx": {"kind": "power", "params": {"b": -2}, "support": [1, 2]},
       "dy": {"kind": "power", "params": {"b": -2}, "support": [1, 2]},
       "grid_n": 7, "experiments": ["solve", "analyze", "audit", "constructive"]}]})";
    const auto cfg = parse_config(text);
    const auto a = fresh_dir("det_a");
    const auto b = fresh_dir("det_b");
    const auto ra = run(cfg, {a, false});
    const auto rb = run(cfg, {b, true});
    EXPECT_EQ(ra.exit_code(), 0);
    EXPECT_EQ(rb.exit_code(), 0);

    // Menu CSV: header plus one row per clustered item, null included.
    const auto menu = slurp(a / "u_menu.csv");
    const auto rows = std::count(menu.begin(), menu.end(), '\n') - 1;
    EXPECT_LE(rows - 1, 4);
    EXPECT_EQ(menu.substr(0, menu.find('\n')), "index,q1,q2,t,mass,members");

    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        if (entry.path().extension() != ".csv") continue;
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
        ++compared;
    }
    EXPECT_EQ(compared, 8u);

    const auto& cons = find(ra, "p", "constructive");
    EXPECT_EQ(cons.status, Status::ok);
    EXPECT_TRUE(fs::exists(a / "p_ustar.csv"));
    const auto& an = find(ra, "p", "analyze");
    bool monotone_checked = false;
    for (const auto& c : an.checks) monotone_checked = monotone_checked || c.name == "menu_monotone";
    EXPECT_TRUE(monotone_checked);
}

TEST(Run, FosdPairGatesAndIdenticalPairs) {
    const std::string text = R"({"schema_version": 1, "scenarios": [
      {"id": "u0", "dx": {"kind": "uniform", "support": [0, 1]}, "dy": {"kind": "uniform", "support": [0, 1]},
       "grid_n": 5, "experiments": [{"fosd_pair": "u1"}]},
      {"id": "u1", "dx": {"kind": "uniform", "support": [0.2, 1.2]}, "dy": {"kind": "uniform", "support": [0.2, 1.2]},
       "grid_n": 5, "experiments": []},
      {"id": "p", "dx": {"kind": "power", "params": {"b": -2}, "support": [1, 2]},
       "dy": {"kind": "power", "params": {"b": -2}, "support": [1, 2]},
       "grid_n": 5, "experiments": [{"fosd_pair": "p"}]}]})";
    const auto rep = run(parse_config(text), {fresh_dir("fosd"), false});
    const auto& gated = find(rep, "u0", "fosd_pair(u1)");
    EXPECT_EQ(gated.status, Status::skipped);
    ASSERT_FALSE(gated.notes.empty());
    EXPECT_NE(gated.notes.front().find("Condition 1"), std::string::npos);
    EXPECT_TRUE(gated.checks.empty());

    const auto& same = find(rep, "p", "fosd_pair(p)");
    EXPECT_EQ(same.status, Status::ok);
    EXPECT_NEAR(same.metrics["revenue_low"].get<double>(), same.metrics["revenue_high"].get<double>(), 1e-8);
    EXPECT_EQ(rep.exit_code(), 0);
}

TEST(RevenueMonotonicity, ShiftedInverseSquare) {
    Scenario lo{"lo", {Density1D::power(-2, 1, 2), Density1D::power(-2, 1, 2)}, 7, false, {}};
    Scenario hi{"hi", {Density1D::power(-2, 1.1, 2.1), Density1D::power(-2, 1.1, 2.1)}, 7, false, {}};
    SolveCache cache;
    const auto r = revenue_monotonicity_experiment(lo, hi, 7, cache);
    ASSERT_TRUE(r.preconditions_hold);
    EXPECT_GE(r.revenue_high, r.revenue_low - 1e-6);
    EXPECT_TRUE(r.payments_monotone);
    // Swapped roles fail the dominance gate instead of asserting.
    const auto s = revenue_monotonicity_experiment(hi, lo, 7, cache);
    EXPECT_FALSE(s.preconditions_hold);
    EXPECT_EQ(s.precondition_notes.size(), 2u);
}

TEST(RunReport, ExitCodePrecedence) {
    RunReport r;
    r.scenarios.push_back({"a", {}, {}});
    EXPECT_EQ(r.exit_code(), 0);
    ExperimentResult e;
    e.check("fine", true);
    EXPECT_EQ(e.status, Status::ok);
    e.check("broken", false);
    EXPECT_EQ(e.status, Status::failed);
    r.scenarios[0].experiments.push_back(e);
    EXPECT_EQ(r.exit_code(), 1);
    ExperimentResult s;
    s.status = Status::solver_error;
    r.scenarios[0].experiments.push_back(s);
    EXPECT_EQ(r.exit_code(), 3);
}

TEST(SolveCache, SharesOneSolvePerKey) {
    SolveCache cache;
    const ProductDistribution d{Density1D::uniform(0, 1), Density1D::uniform(0, 1)};
    const auto a = cache.get("u", d, 4, false, 40);
    const auto b = cache.get("u", d, 4, false, 40);
    EXPECT_EQ(a.get(), b.get());
    const auto c = cache.get("u", d, 4, true, 40);
    EXPECT_NE(a.get(), c.get());
    EXPECT_LE(c->revenue, a->revenue + 1e-12);
}
