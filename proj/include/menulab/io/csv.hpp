#pragma once

#include "menulab/mechanism.hpp"
#include "menulab/menu_analysis.hpp"

#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace menulab::io {

/// Fixed 12 significant digits so artifacts diff cleanly across runs.
inline std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string quote(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

/// Row-at-a-time CSV emitter.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    CsvWriter& header(std::initializer_list<std::string_view> cols) {
        bool first = true;
        for (auto c : cols) {
            if (!first) os_ << ',';
            os_ << quote(c);
            first = false;
        }
        os_ << '\n';
        return *this;
    }

    CsvWriter& cell(double v) { return raw(fmt(v)); }
    CsvWriter& cell(int v) { return raw(std::to_string(v)); }
    CsvWriter& cell(std::size_t v) { return raw(std::to_string(v)); }
    CsvWriter& cell(bool v) { return raw(v ? "1" : "0"); }
    CsvWriter& cell(std::string_view v) { return raw(quote(v)); }
    CsvWriter& cell(const char* v) { return cell(std::string_view(v)); }

    void end_row() {
        os_ << '\n';
        fresh_ = true;
    }

private:
    CsvWriter& raw(const std::string& s) {
        if (!fresh_) os_ << ',';
        os_ << s;
        fresh_ = false;
        return *this;
    }

    std::ostream& os_;
    bool fresh_ = true;
};

/// i, j, x, y, q1, q2, t, u[, mass]
inline void write_mechanism(std::ostream& os, const GridMechanism& gm) {
    CsvWriter w(os);
    if (gm.has_mass()) {
        w.header({"i", "j", "x", "y", "q1", "q2", "t", "u", "mass"});
    } else {
        w.header({"i", "j", "x", "y", "q1", "q2", "t", "u"});
    }
    for (int i = 0; i < gm.nx(); ++i) {
        for (int j = 0; j < gm.ny(); ++j) {
            w.cell(i).cell(j).cell(gm.xs[i]).cell(gm.ys[j]);
            w.cell(gm.q1(i, j)).cell(gm.q2(i, j)).cell(gm.t(i, j)).cell(gm.u(i, j));
            if (gm.has_mass()) w.cell(gm.mass(i, j));
            w.end_row();
        }
    }
}

/// index, q1, q2, t[, mass, members]
inline void write_menu(std::ostream& os, const Menu& m) {
    CsvWriter w(os);
    w.header({"index", "q1", "q2", "t"});
    for (std::size_t k = 0; k < m.size(); ++k) {
        w.cell(k).cell(m[k].q1).cell(m[k].q2).cell(m[k].t);
        w.end_row();
    }
}

inline void write_clusters(std::ostream& os, const std::vector<MenuCluster>& cs) {
    CsvWriter w(os);
    w.header({"index", "q1", "q2", "t", "mass", "members"});
    for (std::size_t k = 0; k < cs.size(); ++k) {
        const auto& r = cs[k].representative;
        w.cell(k).cell(r.q1).cell(r.q2).cell(r.t).cell(cs[k].mass).cell(cs[k].members);
        w.end_row();
    }
}

/// i, j, x, y, label
inline void write_regions(std::ostream& os, const GridMechanism& gm, const RegionReport& rep) {
    CsvWriter w(os);
    w.header({"i", "j", "x", "y", "label"});
    for (int i = 0; i < gm.nx(); ++i) {
        for (int j = 0; j < gm.ny(); ++j) {
            w.cell(i).cell(j).cell(gm.xs[i]).cell(gm.ys[j]).cell(to_string(rep.labels[i][j]));
            w.end_row();
        }
    }
}

}  // namespace menulab::io
