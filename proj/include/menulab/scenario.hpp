#pragma once

#include "menulab/baselines.hpp"
#include "menulab/constructive.hpp"
#include "menulab/distributions.hpp"
#include "menulab/errors.hpp"
#include "menulab/io/csv.hpp"
#include "menulab/lp/instance.hpp"
#include "menulab/menu_analysis.hpp"
#include "menulab/parametric.hpp"

#if __has_include(<nlohmann/json.hpp>)
#include <nlohmann/json.hpp>
#else
#include "json.hpp"
#endif

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace menulab {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

namespace scenario {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum class ExperimentKind { solve, analyze, audit, fosd_pair, constructive, parametric };

inline std::string_view to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::solve: return "solve";
        case ExperimentKind::analyze: return "analyze";
        case ExperimentKind::audit: return "audit";
        case ExperimentKind::fosd_pair: return "fosd_pair";
        case ExperimentKind::constructive: return "constructive";
        case ExperimentKind::parametric: return "parametric";
    }
    return "?";
}

struct Experiment {
    ExperimentKind kind = ExperimentKind::solve;
    std::string arg;  // other scenario id or family name
    std::string pointer;

    [[nodiscard]] std::string label() const {
        return arg.empty() ? std::string(to_string(kind)) : std::string(to_string(kind)) + "(" + arg + ")";
    }
};

struct Scenario {
    std::string id;
    ProductDistribution d{Density1D::uniform(0, 1), Density1D::uniform(0, 1)};
    int grid_n = 9;
    bool unit_demand = false;
    std::vector<Experiment> experiments;
};

struct Settings {
    double clustering_tol = ToleranceConfig{}.clustering_tol;
    double revenue_tol = 1e-6;
    double slope_tol = ToleranceConfig{}.slope_tol;
    int restarts = 8;
    int constructive_grid = 33;
    int max_per_axis = kDefaultMaxTypesPerAxis;
};

struct Config {
    int schema_version = kSchemaVersion;
    Settings settings;
    std::vector<Scenario> scenarios;
    std::string hash;  // FNV-1a of the source text

    [[nodiscard]] const Scenario* find(std::string_view id) const {
        for (const auto& s : scenarios)
            if (s.id == id) return &s;
        return nullptr;
    }
};

inline std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

namespace detail {

// Iterator over the source text that remembers how far the JSON lexer has read.
struct CountingIterator {
    using iterator_category = std::forward_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    const char* p = nullptr;
    const char* base = nullptr;
    std::size_t* seen = nullptr;

    reference operator*() const {
        *seen = std::max(*seen, static_cast<std::size_t>(p - base));
        return *p;
    }
    CountingIterator& operator++() {
        ++p;
        return *this;
    }
    CountingIterator operator++(int) {
        auto c = *this;
        ++p;
        return c;
    }
    bool operator==(const CountingIterator& o) const { return p == o.p; }
    bool operator!=(const CountingIterator& o) const { return p != o.p; }
};

// SAX handler recording the source offset of every key and array element by
// JSON pointer.
class PositionTracker : public nlohmann::json_sax<json> {
public:
    PositionTracker(std::string_view text, const std::size_t* seen, std::map<std::string, std::size_t>* out)
        : text_(text), seen_(seen), out_(out) {}

    bool null() override { return value(); }
    bool boolean(bool) override { return value(); }
    bool number_integer(number_integer_t) override { return value(); }
    bool number_unsigned(number_unsigned_t) override { return value(); }
    bool number_float(number_float_t, const string_t&) override { return value(); }
    bool string(string_t&) override { return value(); }
    bool binary(binary_t&) override { return value(); }
    bool start_object(std::size_t) override {
        value();
        stack_.push_back({false, -1, {}});
        return true;
    }
    bool end_object() override {
        stack_.pop_back();
        return done();
    }
    bool start_array(std::size_t) override {
        value();
        stack_.push_back({true, -1, {}});
        return true;
    }
    bool end_array() override {
        stack_.pop_back();
        return done();
    }
    bool key(string_t& k) override {
        stack_.back().key = k;
        const std::size_t len = k.size() + 2;
        record(*seen_ + 1 >= len ? *seen_ + 1 - len : 0);
        return done();
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }

private:
    struct Frame {
        bool array;
        long index;
        std::string key;
    };

    // The lexer has already consumed the token (and maybe one lookahead
    // character), so an element starts at the first non-blank, non-comma
    // character after the previous token.
    bool value() {
        if (!stack_.empty() && stack_.back().array) {
            ++stack_.back().index;
            std::size_t at = last_ + 1;
            while (at < text_.size() && (std::isspace(static_cast<unsigned char>(text_[at])) || text_[at] == ','))
                ++at;
            record(at);
        }
        return done();
    }

    bool done() {
        last_ = *seen_;
        return true;
    }

    void record(std::size_t at) {
        std::string ptr;
        for (const auto& f : stack_) ptr += "/" + (f.array ? std::to_string(f.index) : escape(f.key));
        out_->emplace(ptr, at);
    }

    static std::string escape(const std::string& k) {
        std::string r;
        for (char c : k) {
            if (c == '~') r += "~0";
            else if (c == '/') r += "~1";
            else r += c;
        }
        return r;
    }

    std::string_view text_;
    const std::size_t* seen_;
    std::map<std::string, std::size_t>* out_;
    std::vector<Frame> stack_;
    std::size_t last_ = 0;
};

inline std::pair<int, int> line_column(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    int line = 1;
    int col = 1;
    for (std::size_t k = 0; k < offset; ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

[[noreturn]] inline void fail(const std::string& ptr, const std::string& msg) {
    throw ConfigError((ptr.empty() ? std::string("/") : ptr) + ": " + msg, ptr);
}

inline const json& field(const json& obj, const std::string& ptr, const char* name) {
    const auto it = obj.find(name);
    if (it == obj.end()) fail(ptr, std::string("missing required field '") + name + "'");
    return *it;
}

inline double number(const json& v, const std::string& ptr) {
    if (!v.is_number()) fail(ptr, "expected a number");
    return v.get<double>();
}

inline int integer(const json& v, const std::string& ptr) {
    if (!v.is_number_integer()) fail(ptr, "expected an integer");
    return v.get<int>();
}

inline std::vector<double> numbers(const json& v, const std::string& ptr) {
    if (!v.is_array()) fail(ptr, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], ptr + "/" + std::to_string(k)));
    return out;
}

inline void only_keys(const json& obj, const std::string& ptr, std::initializer_list<std::string_view> keys) {
    for (const auto& [k, _] : obj.items()) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(ptr + "/" + k, "unknown field '" + k + "'");
    }
}

}  // namespace detail

/// Density from a `{kind, params, support}` record.
inline Density1D parse_density(const json& v, const std::string& ptr = {}) {
    using namespace detail;
    if (!v.is_object()) fail(ptr, "density must be an object {kind, params, support}");
    only_keys(v, ptr, {"kind", "params", "support"});
    const auto& kind = field(v, ptr, "kind");
    if (!kind.is_string()) fail(ptr + "/kind", "expected a string");
    const auto sup = numbers(field(v, ptr, "support"), ptr + "/support");
    if (sup.size() != 2) fail(ptr + "/support", "support must be [lo, hi]");
    static const json empty = json::object();
    const auto& params = v.contains("params") ? v.at("params") : empty;
    const std::string pp = ptr + "/params";
    if (!params.is_object()) fail(pp, "params must be an object");
    const std::string k = kind.get<std::string>();
    try {
        if (k == "uniform") {
            only_keys(params, pp, {});
            return Density1D::uniform(sup[0], sup[1]);
        }
        if (k == "power") {
            only_keys(params, pp, {"a", "b"});
            const double a = params.contains("a") ? number(params.at("a"), pp + "/a") : 1.0;
            return Density1D::power(number(field(params, pp, "b"), pp + "/b"), sup[0], sup[1], a);
        }
        if (k == "truncated_exponential") {
            only_keys(params, pp, {"lambda"});
            return Density1D::truncated_exponential(number(field(params, pp, "lambda"), pp + "/lambda"), sup[0],
                                                    sup[1]);
        }
        if (k == "poly_exp") {
            only_keys(params, pp, {"coeffs", "exp_coeffs"});
            auto c = numbers(field(params, pp, "coeffs"), pp + "/coeffs");
            auto e = params.contains("exp_coeffs") ? numbers(params.at("exp_coeffs"), pp + "/exp_coeffs")
                                                   : std::vector<double>{};
            return Density1D::poly_exp(std::move(c), std::move(e), sup[0], sup[1]);
        }
        if (k == "tabulated") {
            only_keys(params, pp, {"values"});
            return Density1D::tabulated(numbers(field(params, pp, "values"), pp + "/values"), sup[0], sup[1]);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        fail(ptr, std::string("invalid density: ") + e.what());
    }
    fail(ptr + "/kind", "unknown density kind '" + k + "'");
}

/// Command-line density: either a JSON record or a colon form such as
/// `uniform:0:1`, `power:-2:1:2[:a]`, `texp:lambda:lo:hi`.
inline Density1D parse_density_arg(std::string_view s) {
    if (!s.empty() && s.front() == '{') {
        try {
            return parse_density(json::parse(s));
        } catch (const json::exception& e) {
            throw ConfigError(std::string("density: ") + e.what());
        }
    }
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    std::vector<double> v;
    try {
        for (std::size_t k = 1; k < parts.size(); ++k) v.push_back(std::stod(parts[k]));
    } catch (const std::exception&) {
        throw ConfigError("density '" + std::string(s) + "': malformed number");
    }
    const auto& kind = parts[0];
    try {
        if (kind == "uniform" && v.size() == 2) return Density1D::uniform(v[0], v[1]);
        if (kind == "power" && (v.size() == 3 || v.size() == 4))
            return Density1D::power(v[0], v[1], v[2], v.size() == 4 ? v[3] : 1.0);
        if ((kind == "texp" || kind == "truncated_exponential") && v.size() == 3)
            return Density1D::truncated_exponential(v[0], v[1], v[2]);
    } catch (const Error& e) {
        throw ConfigError("density '" + std::string(s) + "': " + e.what());
    }
    throw ConfigError("density '" + std::string(s) +
                      "': expected uniform:LO:HI, power:B:LO:HI[:A], texp:LAMBDA:LO:HI or a JSON record");
}

namespace detail {

inline Experiment parse_experiment(const json& v, const std::string& ptr) {
    Experiment e;
    e.pointer = ptr;
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "solve") e.kind = ExperimentKind::solve;
        else if (s == "analyze") e.kind = ExperimentKind::analyze;
        else if (s == "audit") e.kind = ExperimentKind::audit;
        else if (s == "constructive") e.kind = ExperimentKind::constructive;
        else if (s == "fosd_pair" || s == "parametric") fail(ptr, "'" + s + "' needs an argument, e.g. {\"" + s + "\": ...}");
        else fail(ptr, "unknown experiment '" + s + "'");
        return e;
    }
    if (!v.is_object() || v.size() != 1) fail(ptr, "experiment must be a name or a single-key object");
    const auto& [k, arg] = *v.items().begin();
    const std::string ap = ptr + "/" + k;
    if (!arg.is_string()) fail(ap, "expected a string");
    e.arg = arg.get<std::string>();
    if (k == "fosd_pair") {
        e.kind = ExperimentKind::fosd_pair;
    } else if (k == "parametric") {
        e.kind = ExperimentKind::parametric;
        if (!parse_family(e.arg)) fail(ap, "unknown menu family '" + e.arg + "'");
    } else {
        fail(ap, "unknown experiment '" + k + "'");
    }
    return e;
}

inline bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

inline Config parse_tree(const json& root) {
    Config cfg;
    if (!root.is_object()) fail("", "config must be a JSON object");
    only_keys(root, "", {"schema_version", "settings", "scenarios"});
    cfg.schema_version = integer(field(root, "", "schema_version"), "/schema_version");
    if (cfg.schema_version != kSchemaVersion) {
        fail("/schema_version", "unsupported schema version " + std::to_string(cfg.schema_version) + " (expected " +
                                    std::to_string(kSchemaVersion) + ")");
    }
    if (root.contains("settings")) {
        const auto& s = root.at("settings");
        const std::string sp = "/settings";
        if (!s.is_object()) fail(sp, "settings must be an object");
        only_keys(s, sp,
                  {"clustering_tol", "revenue_tol", "slope_tol", "restarts", "constructive_grid", "max_per_axis"});
        auto& st = cfg.settings;
        if (s.contains("clustering_tol")) st.clustering_tol = number(s.at("clustering_tol"), sp + "/clustering_tol");
        if (s.contains("revenue_tol")) st.revenue_tol = number(s.at("revenue_tol"), sp + "/revenue_tol");
        if (s.contains("slope_tol")) st.slope_tol = number(s.at("slope_tol"), sp + "/slope_tol");
        if (s.contains("restarts")) st.restarts = integer(s.at("restarts"), sp + "/restarts");
        if (s.contains("constructive_grid"))
            st.constructive_grid = integer(s.at("constructive_grid"), sp + "/constructive_grid");
        if (s.contains("max_per_axis")) st.max_per_axis = integer(s.at("max_per_axis"), sp + "/max_per_axis");
        if (!(st.clustering_tol > 0)) fail(sp + "/clustering_tol", "must be positive");
        if (!(st.revenue_tol >= 0)) fail(sp + "/revenue_tol", "must be nonnegative");
        if (!(st.slope_tol > 0)) fail(sp + "/slope_tol", "must be positive");
        if (st.restarts < 8) fail(sp + "/restarts", "must be at least 8");
        if (st.constructive_grid < 3) fail(sp + "/constructive_grid", "must be at least 3");
        if (st.max_per_axis < 2) fail(sp + "/max_per_axis", "must be at least 2");
    }
    const auto& list = field(root, "", "scenarios");
    if (!list.is_array()) fail("/scenarios", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string p = "/scenarios/" + std::to_string(k);
        const auto& s = list[k];
        if (!s.is_object()) fail(p, "scenario must be an object");
        only_keys(s, p, {"id", "dx", "dy", "grid_n", "unit_demand", "experiments"});
        Scenario sc;
        const auto& id = field(s, p, "id");
        if (!id.is_string() || !valid_id(id.get<std::string>())) {
            fail(p + "/id", "id must be a nonempty string of letters, digits, '_', '-' or '.'");
        }
        sc.id = id.get<std::string>();
        if (cfg.find(sc.id)) fail(p + "/id", "duplicate scenario id '" + sc.id + "'");
        sc.d = {parse_density(field(s, p, "dx"), p + "/dx"), parse_density(field(s, p, "dy"), p + "/dy")};
        sc.grid_n = integer(field(s, p, "grid_n"), p + "/grid_n");
        if (sc.grid_n < 2 || sc.grid_n > cfg.settings.max_per_axis) {
            fail(p + "/grid_n", "grid_n must lie in [2, " + std::to_string(cfg.settings.max_per_axis) + "]");
        }
        if (s.contains("unit_demand")) {
            if (!s.at("unit_demand").is_boolean()) fail(p + "/unit_demand", "expected true or false");
            sc.unit_demand = s.at("unit_demand").get<bool>();
        }
        const auto& ex = field(s, p, "experiments");
        if (!ex.is_array()) fail(p + "/experiments", "expected an array");
        for (std::size_t e = 0; e < ex.size(); ++e)
            sc.experiments.push_back(parse_experiment(ex[e], p + "/experiments/" + std::to_string(e)));
        cfg.scenarios.push_back(std::move(sc));
    }
    for (const auto& sc : cfg.scenarios)
        for (const auto& e : sc.experiments)
            if (e.kind == ExperimentKind::fosd_pair && !cfg.find(e.arg)) {
                fail(e.pointer + "/fosd_pair", "fosd_pair references unknown scenario '" + e.arg + "'");
            }
    return cfg;
}

}  // namespace detail

/// Parses and validates a config. Every ConfigError carries a line and column.
inline Config parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError("syntax error: " + std::string(e.what()), {}, line, col);
    }
    try {
        auto cfg = detail::parse_tree(root);
        cfg.hash = fnv1a_hex(text);
        return cfg;
    } catch (const ConfigError& e) {
        std::size_t seen = 0;
        std::map<std::string, std::size_t> where;
        detail::PositionTracker tracker(text, &seen, &where);
        const detail::CountingIterator first{text.data(), text.data(), &seen};
        const detail::CountingIterator last{text.data() + text.size(), text.data(), &seen};
        json::sax_parse(first, last, &tracker);
        // Walk up the pointer until a recorded location is found.
        std::string ptr = e.pointer();
        std::size_t at = 0;
        while (true) {
            const auto it = where.find(ptr);
            if (it != where.end()) {
                at = it->second;
                break;
            }
            const auto cut = ptr.find_last_of('/');
            if (cut == std::string::npos || ptr.empty()) break;
            ptr.resize(cut);
        }
        const auto [line, col] = detail::line_column(text, at);
        throw ConfigError(e.what(), e.pointer(), line, col);
    }
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Execution

/// 12 significant digits, as in the CSV artifacts.
inline double round12(double v) { return std::isfinite(v) ? std::stod(io::fmt(v)) : v; }

struct Solved {
    DiscreteInstance inst;
    GridMechanism gm;
    double revenue = 0.0;
    double seconds = 0.0;
};

/// Thread-safe memo of LP solves keyed by (distribution, n, unit demand).
class SolveCache {
public:
    std::shared_ptr<const Solved> get(const std::string& key, const ProductDistribution& d, int n, bool unit_demand,
                                      int max_per_axis) {
        std::shared_future<std::shared_ptr<const Solved>> fut;
        std::promise<std::shared_ptr<const Solved>> mine;
        bool owner = false;
        {
            std::lock_guard lock(mu_);
            const auto full = key + "@" + std::to_string(n) + (unit_demand ? "u" : "");
            auto it = entries_.find(full);
            if (it == entries_.end()) {
                fut = mine.get_future().share();
                entries_.emplace(full, fut);
                owner = true;
            } else {
                fut = it->second;
            }
        }
        if (owner) {
            try {
                const auto t0 = std::chrono::steady_clock::now();
                auto s = std::make_shared<Solved>();
                s->inst = discretize(d, n);
                SolveOptions opt;
                opt.unit_demand = unit_demand;
                opt.max_per_axis = max_per_axis;
                s->gm = solve_optimal(s->inst, opt);
                s->revenue = s->gm.expected_payment();
                s->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                mine.set_value(std::move(s));
            } catch (...) {
                mine.set_exception(std::current_exception());
            }
        }
        return fut.get();
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_future<std::shared_ptr<const Solved>>> entries_;
};

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
};

enum class Status { ok, failed, skipped, solver_error, error };

inline std::string_view to_string(Status s) {
    switch (s) {
        case Status::ok: return "ok";
        case Status::failed: return "failed";
        case Status::skipped: return "skipped";
        case Status::solver_error: return "solver_error";
        case Status::error: return "error";
    }
    return "?";
}

struct ExperimentResult {
    std::string name;
    Status status = Status::ok;
    std::vector<CheckResult> checks;
    std::vector<std::string> notes;
    std::vector<std::string> artifacts;
    ordered_json metrics = ordered_json::object();
    double seconds = 0.0;

    void check(std::string n, bool ok, std::string detail = {}) {
        checks.push_back({std::move(n), ok, std::move(detail)});
        if (!ok && status == Status::ok) status = Status::failed;
    }
};

struct ScenarioResult {
    std::string id;
    std::vector<ExperimentResult> experiments;
    std::vector<BaselineReport> baselines;
};

struct RunReport {
    std::string version{kVersion};
    std::string config_hash;
    std::vector<ScenarioResult> scenarios;

    [[nodiscard]] bool any(Status s) const {
        for (const auto& sc : scenarios)
            for (const auto& e : sc.experiments)
                if (e.status == s) return true;
        return false;
    }

    /// 3 on any solver failure, else 1 on any failed check or error, else 0.
    [[nodiscard]] int exit_code() const {
        if (any(Status::solver_error)) return 3;
        if (any(Status::failed) || any(Status::error)) return 1;
        return 0;
    }

    [[nodiscard]] std::size_t experiment_count() const {
        std::size_t n = 0;
        for (const auto& sc : scenarios) n += sc.experiments.size();
        return n;
    }

    [[nodiscard]] ordered_json to_json() const {
        ordered_json j;
        j["tool"] = "menulab";
        j["version"] = version;
        j["config_hash"] = config_hash;
        j["exit_code"] = exit_code();
        j["experiment_count"] = experiment_count();
        j["scenarios"] = ordered_json::array();
        for (const auto& sc : scenarios) {
            ordered_json s;
            s["id"] = sc.id;
            s["experiments"] = ordered_json::array();
            for (const auto& e : sc.experiments) {
                ordered_json x;
                x["experiment"] = e.name;
                x["status"] = std::string(to_string(e.status));
                x["seconds"] = round12(e.seconds);
                x["metrics"] = e.metrics;
                x["checks"] = ordered_json::array();
                for (const auto& c : e.checks) {
                    x["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
                }
                x["notes"] = e.notes;
                x["artifacts"] = e.artifacts;
                s["experiments"].push_back(std::move(x));
            }
            j["scenarios"].push_back(std::move(s));
        }
        return j;
    }
};

struct RevenueMonotonicityReport {
    bool preconditions_hold = true;
    std::vector<std::string> precondition_notes;
    double revenue_low = 0.0;
    double revenue_high = 0.0;
    bool revenue_monotone = true;
    double payment_drop_low = 0.0;   // largest decrease of t along a grid line
    double payment_drop_high = 0.0;
    bool payments_monotone = true;
};

/// Largest amount by which t decreases between neighbouring types.
inline double max_payment_drop(const GridMechanism& gm) {
    double w = 0.0;
    for (int i = 0; i < gm.nx(); ++i)
        for (int j = 0; j < gm.ny(); ++j) {
            if (i + 1 < gm.nx()) w = std::max(w, gm.t(i, j) - gm.t(i + 1, j));
            if (j + 1 < gm.ny()) w = std::max(w, gm.t(i, j) - gm.t(i, j + 1));
        }
    return w;
}

/// Solves both instances at `n` types per axis and checks that the
/// stochastically larger one earns at least as much and that both payment
/// grids are weakly increasing in each coordinate. Preconditions (marginal
/// dominance, Condition 1 for both) are reported, not thrown.
inline RevenueMonotonicityReport revenue_monotonicity_experiment(const Scenario& low, const Scenario& high, int n,
                                                                 SolveCache& cache, double revenue_tol = 1e-6,
                                                                 double payment_tol = 1e-9,
                                                                 int max_per_axis = kDefaultMaxTypesPerAxis) {
    RevenueMonotonicityReport r;
    auto weakly = [](const Density1D& g, const Density1D& f) { return g == f || fosd_dominates(g, f); };
    if (!weakly(high.d.dx, low.d.dx)) r.precondition_notes.push_back("x-marginal of " + high.id + " does not dominate");
    if (!weakly(high.d.dy, low.d.dy)) r.precondition_notes.push_back("y-marginal of " + high.id + " does not dominate");
    for (const Scenario* s : {&low, &high}) {
        const auto c1 = check_condition(s->d, 1);
        if (!c1.holds) {
            r.precondition_notes.push_back("Condition 1 fails for " + s->id + " (margin " + io::fmt(c1.worst_margin) +
                                           ")");
        }
    }
    r.preconditions_hold = r.precondition_notes.empty();
    if (!r.preconditions_hold) return r;
    const auto a = cache.get(low.id, low.d, n, false, max_per_axis);
    const auto b = cache.get(high.id, high.d, n, false, max_per_axis);
    r.revenue_low = a->revenue;
    r.revenue_high = b->revenue;
    r.revenue_monotone = r.revenue_high >= r.revenue_low - revenue_tol;
    r.payment_drop_low = max_payment_drop(a->gm);
    r.payment_drop_high = max_payment_drop(b->gm);
    r.payments_monotone = r.payment_drop_low <= payment_tol && r.payment_drop_high <= payment_tol;
    return r;
}

struct RunOptions {
    std::filesystem::path out_dir = ".";
    bool parallel = false;
};

namespace detail {

inline std::string write_artifact(const RunOptions& opt, const std::string& name,
                                  const std::function<void(std::ostream&)>& body) {
    const auto path = opt.out_dir / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write artifact '" + path.string() + "'");
    body(os);
    return name;
}

inline bool uniform_unit_width(const Density1D& d) {
    return d.kind() == DensityKind::uniform && std::abs(d.hi() - d.lo() - 1.0) < 1e-12;
}

inline void run_experiment(const Config& cfg, const Scenario& sc, const Experiment& ex, SolveCache& cache,
                           const RunOptions& opt, ExperimentResult& out, ScenarioResult& sr) {
    const auto& st = cfg.settings;
    auto solved = [&] { return cache.get(sc.id, sc.d, sc.grid_n, sc.unit_demand, st.max_per_axis); };
    auto& m = out.metrics;
    std::array<bool, 5> cond{};
    for (int c = 1; c <= 5; ++c) cond[c - 1] = check_condition(sc.d, c).holds;

    switch (ex.kind) {
        case ExperimentKind::solve: {
            const auto s = solved();
            m["n"] = sc.grid_n;
            m["unit_demand"] = sc.unit_demand;
            m["lp_revenue"] = round12(s->revenue);
            m["lp_seconds"] = round12(s->seconds);
            out.artifacts.push_back(write_artifact(opt, sc.id + "_mechanism.csv",
                                                   [&](std::ostream& os) { io::write_mechanism(os, s->gm); }));
            out.check("lp_solution_valid", validate(s->gm, {sc.unit_demand}, 1e-8).ok());
            break;
        }
        case ExperimentKind::analyze: {
            const auto s = solved();
            const auto& gm = s->gm;
            const auto clusters = cluster_menu(gm, st.clustering_tol);
            const auto menu = extract_menu(gm, st.clustering_tol);
            const auto count = count_menu_items(gm, st.clustering_tol);
            const auto mono = check_menu_monotonicity(menu);
            const auto regions = classify_regions(gm, st.clustering_tol);
            const auto bd = edge_segments(gm, Edge::BD, st.slope_tol);
            const auto cd = edge_segments(gm, Edge::CD, st.slope_tol);
            m["raw_items"] = count.raw;
            m["clustered_items"] = count.clustered;
            m["clustered_non_null"] = count.clustered_non_null();
            ordered_json sweep = ordered_json::object();
            for (double tol : {1e-3, 5e-3, 1e-2}) sweep[io::fmt(tol)] = count_menu_items(gm, tol).clustered;
            m["clustered_items_by_tol"] = sweep;
            m["menu_monotone"] = mono.monotone;
            if (!mono.monotone) m["monotonicity_reason"] = mono.reason;
            m["regions"] = {{"zero", regions.zero_count},
                            {"vert", regions.vert_count},
                            {"horz", regions.horz_count},
                            {"full", regions.full_count},
                            {"other", regions.other_count}};
            m["region_geometry_ok"] = regions.geometry_ok();
            m["bd_segments"] = bd.segments();
            m["cd_segments"] = cd.segments();
            m["conditions"] = cond;
            for (const auto& nte : regions.notes) out.notes.push_back(nte);
            out.artifacts.push_back(write_artifact(opt, sc.id + "_menu.csv",
                                                   [&](std::ostream& os) { io::write_clusters(os, clusters); }));
            out.artifacts.push_back(write_artifact(
                opt, sc.id + "_regions.csv", [&](std::ostream& os) { io::write_regions(os, gm, regions); }));
            // Bounds count non-null items; the raw and clustered totals are in the metrics.
            const auto total = count.clustered_non_null();
            if (cond[0]) out.check("menu_monotone", mono.monotone, mono.reason);
            if (!sc.unit_demand) {
                if (cond[1] && cond[2]) {
                    out.check("at_most_4_items", total <= 4, std::to_string(total) + " non-null items");
                    out.check("bd_cd_two_pieces", bd.segments() <= 2 && cd.segments() <= 2,
                              "BD " + std::to_string(bd.segments()) + ", CD " + std::to_string(cd.segments()));
                }
                if (cond[1] && cond[3]) out.check("at_most_3_items", total <= 3, std::to_string(total) + " non-null items");
                if (cond[1] && cond[4] && sc.d.is_iid()) {
                    out.check("at_most_6_items", total <= 6, std::to_string(total) + " non-null items");
                }
                if (cond[1]) {
                    out.check("region_geometry", regions.geometry_ok() && regions.other_count == 0,
                              regions.notes.empty() ? std::string{} : regions.notes.front());
                }
            } else if (sc.d.is_iid() && uniform_unit_width(sc.d.dx) && sc.d.dx.lo() < 1.372) {
                out.check("at_most_5_items", total <= 5, std::to_string(total) + " non-null items");
            }
            break;
        }
        case ExperimentKind::audit: {
            const auto s = solved();
            if (sc.unit_demand) {
                out.status = Status::skipped;
                out.notes.push_back("approximation audits apply to additive buyers only");
                break;
            }
            auto rep = audit_ratios(sc.d, s->inst, s->revenue, sc.id, st.revenue_tol);
            m["separate"] = round12(rep.separate_revenue);
            m["bundle"] = round12(rep.bundle_revenue);
            m["lp"] = round12(rep.lp_revenue);
            m["ratio_sep"] = round12(rep.ratio_separate());
            m["ratio_bundle"] = round12(rep.ratio_bundle());
            m["conditions"] = rep.conditions;
            for (const auto& c : rep.checks) {
                if (c.applicable) out.check(c.name, c.passed, io::fmt(c.lhs) + " vs " + io::fmt(c.rhs));
            }
            sr.baselines.push_back(std::move(rep));
            break;
        }
        case ExperimentKind::fosd_pair: {
            const Scenario* other = cfg.find(ex.arg);
            const Scenario* low = &sc;
            const Scenario* high = other;
            const auto dominated = [](const Scenario& g, const Scenario& f) {
                return (g.d.dx == f.d.dx || fosd_dominates(g.d.dx, f.d.dx)) &&
                       (g.d.dy == f.d.dy || fosd_dominates(g.d.dy, f.d.dy));
            };
            if (!dominated(*other, sc) && dominated(sc, *other)) std::swap(low, high);
            const auto r = revenue_monotonicity_experiment(*low, *high, sc.grid_n, cache, st.revenue_tol, 1e-9,
                                                           st.max_per_axis);
            m["low"] = low->id;
            m["high"] = high->id;
            m["preconditions_hold"] = r.preconditions_hold;
            if (!r.preconditions_hold) {
                out.status = Status::skipped;
                out.notes = r.precondition_notes;
                break;
            }
            m["revenue_low"] = round12(r.revenue_low);
            m["revenue_high"] = round12(r.revenue_high);
            m["payment_drop_low"] = round12(r.payment_drop_low);
            m["payment_drop_high"] = round12(r.payment_drop_high);
            out.check("revenue_monotone", r.revenue_monotone,
                      io::fmt(r.revenue_high) + " vs " + io::fmt(r.revenue_low));
            out.check("payments_weakly_increasing", r.payments_monotone);
            break;
        }
        case ExperimentKind::constructive: {
            const auto c1 = check_condition(sc.d, 1);
            if (!c1.holds) {
                out.status = Status::skipped;
                out.notes.push_back("Condition 1 fails (margin " + io::fmt(c1.worst_margin) + ")");
                break;
            }
            if (sc.unit_demand) {
                out.status = Status::skipped;
                out.notes.push_back("the supremum construction assumes an additive buyer");
                break;
            }
            const auto s = solved();
            const auto rep = verify_condition1_improvement(s->gm, sc.d, st.constructive_grid, {}, st.revenue_tol);
            m["revenue_input"] = round12(rep.revenue_input);
            m["revenue_supremum"] = round12(rep.revenue_supremum);
            m["min_dominance_margin"] = round12(rep.min_dominance_margin);
            m["max_dominance_gap"] = round12(rep.max_dominance_gap);
            m["edge_mismatch"] = round12(rep.edge_mismatch);
            m["planes"] = rep.supremum.planes.size();
            m["seed_multiplicity"] = rep.supremum.multiplicity;
            out.check("revenue_weakly_improves", rep.improves);
            out.check("dominates_input", rep.min_dominance_margin >= -ToleranceConfig{}.abs_tol);
            out.check("agrees_on_ab_ac", rep.edge_mismatch <= 1e-6);
            out.check("supremum_convex", rep.u_star_convex);
            out.artifacts.push_back(write_artifact(opt, sc.id + "_ustar.csv", [&](std::ostream& os) {
                io::write_mechanism(os, rep.supremum.mechanism);
            }));
            break;
        }
        case ExperimentKind::parametric: {
            const auto id = *parse_family(ex.arg);
            const auto fam = make_family(id, sc.d.rect());
            const bool ud_family = id == FamilyId::unit_demand_five;
            if (sc.unit_demand && !ud_family) {
                out.status = Status::skipped;
                out.notes.push_back(ex.arg + " menus violate unit demand");
                break;
            }
            if (id == FamilyId::six_item_symmetric && !sc.d.is_iid()) {
                out.status = Status::skipped;
                out.notes.push_back("six_item_symmetric requires identical marginals");
                break;
            }
            const auto s = solved();
            const auto g = gap_vs_lp(fam, sc.d, s->inst, s->revenue, st.restarts);
            m["family"] = ex.arg;
            m["revenue_continuous"] = round12(g.family_continuous);
            m["revenue_discrete"] = round12(g.family_discrete);
            m["lp_revenue"] = round12(g.lp_revenue);
            m["gap"] = round12(g.gap);
            ordered_json params = ordered_json::object();
            for (std::size_t k = 0; k < fam.dim(); ++k) params[fam.names[k]] = round12(g.fit.params[k]);
            m["params"] = params;
            out.check("family_not_above_lp", g.gap >= -1e-9, io::fmt(g.gap));
            out.check("family_menu_valid",
                      validate(mechanism_from_menu(g.fit.menu, s->gm.xs, s->gm.ys), {sc.unit_demand}).ok());
            const std::string stem = sc.id + "_" + ex.arg;
            out.artifacts.push_back(write_artifact(opt, stem + "_menu.csv",
                                                   [&](std::ostream& os) { io::write_menu(os, g.fit.menu); }));
            out.artifacts.push_back(write_artifact(opt, stem + "_params.json", [&](std::ostream& os) {
                ordered_json rec;
                rec["scenario"] = sc.id;
                rec["family"] = ex.arg;
                rec["params"] = params;
                rec["revenue_continuous"] = round12(g.family_continuous);
                rec["revenue_discrete"] = round12(g.family_discrete);
                os << rec.dump(2) << '\n';
            }));
            break;
        }
    }
}

inline ScenarioResult run_scenario(const Config& cfg, const Scenario& sc, SolveCache& cache, const RunOptions& opt) {
    ScenarioResult sr;
    sr.id = sc.id;
    for (const auto& ex : sc.experiments) {
        ExperimentResult r;
        r.name = ex.label();
        const auto t0 = std::chrono::steady_clock::now();
        try {
            run_experiment(cfg, sc, ex, cache, opt, r, sr);
        } catch (const SolverError& e) {
            r.status = Status::solver_error;
            r.notes.push_back(std::string("solver error: ") + e.what());
        } catch (const std::exception& e) {
            r.status = Status::error;
            r.notes.push_back(e.what());
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        sr.experiments.push_back(std::move(r));
    }
    return sr;
}

}  // namespace detail

/// Runs every scenario (concurrently with `parallel`), writes the CSV/JSON
/// artifacts plus `report.json` into `out_dir`, and returns the report.
inline RunReport run(const Config& cfg, const RunOptions& opt = {}) {
    std::filesystem::create_directories(opt.out_dir);
    SolveCache cache;
    RunReport report;
    report.config_hash = cfg.hash;
    if (opt.parallel) {
        std::vector<std::future<ScenarioResult>> jobs;
        for (const auto& sc : cfg.scenarios) {
            jobs.push_back(std::async(std::launch::async,
                                      [&, p = &sc] { return detail::run_scenario(cfg, *p, cache, opt); }));
        }
        for (auto& j : jobs) report.scenarios.push_back(j.get());
    } else {
        for (const auto& sc : cfg.scenarios) report.scenarios.push_back(detail::run_scenario(cfg, sc, cache, opt));
    }

    bool any_audit = false;
    for (const auto& s : report.scenarios) any_audit = any_audit || !s.baselines.empty();
    if (any_audit) {
        detail::write_artifact(opt, "baselines.csv", [&](std::ostream& os) {
            write_baseline_header(os);
            for (const auto& s : report.scenarios)
                for (const auto& b : s.baselines) write_baseline_row(os, b);
        });
    }
    detail::write_artifact(opt, "report.json", [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });
    return report;
}

}  // namespace scenario
}  // namespace menulab
