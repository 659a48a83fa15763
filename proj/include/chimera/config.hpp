#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grid.hpp"
#include "ledger.hpp"
#include "model.hpp"
#include "scheme.hpp"
#include "sinkhorn.hpp"

namespace chimera {

struct InitialCondition {
    // u: gaussian_bump, cos2_bump, two_bumps, uniform, from_file
    std::string u = "gaussian_bump";
    std::vector<double> center;  // defaults to the box center
    double width = 1.0;
    std::vector<double> center2;
    double width2 = 1.0;
    double weight2 = 1.0;  // mass share of the second bump relative to the first
    std::string path;      // snapshot stem for from_file
    // v: zero, gaussian (v_amp exp(-|x - center|^2 / v_width^2)), equilibrium
    std::string v = "zero";
    double v_amp = 0, v_width = 1.0;
    // w: zero, scaled (w_scale v), coupled (gam1 v - kap1 Lap v), equilibrium
    std::string w = "zero";
    double w_scale = 1.0;
    bool mollify = true;  // start from the mollified density of the scheme
};

struct RunConfig {
    ModelParams model;
    GridSpec grid;
    OtConfig ot;
    InnerSolveConfig inner;
    InitialCondition initial;
    double horizon_T = 1.0;
    int snapshot_every = 0;  // 0: first and last only
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    double tol_step = 1e-6;    // relative to 1 + |L_before|
    double tol_audit = -1;     // negative: 1e-3 |L_0|
    std::vector<double> de_giorgi_fractions{0.25, 0.5, 1.0};
    std::vector<double> gate_taus;  // extra step sizes probed by the initial gate
    // critical-mass estimator
    int critical_max_outer = 500;
    double critical_tol = 1e-6;

    // ceil(T / tau) with a guard against T / tau landing a rounding error above an integer
    int step_count() const {
        double r = horizon_T / model.tau;
        double k = std::ceil(r);
        if (k - 1 >= r * (1 - 1e-12)) k -= 1;
        return int(k);
    }
};

namespace detail {

inline std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream is(t);
    std::string tok;
    while (is >> tok) {
        std::size_t used = 0;
        double x = 0;
        try {
            x = std::stod(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        require(used == tok.size(), "config: " + key + " has a non-numeric entry '" + tok + "'");
        out.push_back(x);
    }
    return out;
}

}  // namespace detail

// INI text: [model], [grid], [ot], [inner], [initial], [run], [critical]. Unknown keys are errors.
inline RunConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(std::string("config: ") + e.what());
    }
    static const std::map<std::string, std::set<std::string>> known{
        {"model", {"m", "eps1", "eps2", "kap1", "kap2", "gam1", "gam2", "tau", "M"}},
        {"grid", {"d", "n", "L", "origin"}},
        {"ot", {"epsilon", "epsilon_over_h2", "max_iter", "marginal_tol", "eps_scaling"}},
        {"inner", {"max_outer", "tol_u", "tol_obj", "anneal", "ref_weight"}},
        {"initial",
         {"u", "center", "width", "center2", "width2", "weight2", "path", "v", "v_amp", "v_width", "w", "w_scale",
          "mollify"}},
        {"run",
         {"T", "snapshot_every", "output_dir", "seed", "tol_step", "tol_audit", "de_giorgi_fractions", "gate_taus"}},
        {"critical", {"max_outer", "tol"}}};
    for (const auto& [sec, body] : tree) {
        auto it = known.find(sec);
        require(it != known.end(), "config: unknown section [" + sec + "]");
        require(body.data().empty(), "config: key '" + sec + "' outside any section");
        for (const auto& [key, val] : body)
            require(it->second.count(key), "config: unknown key '" + key + "' in [" + sec + "]");
    }
    auto num = [&](const std::string& path, double def) {
        auto v = tree.get_optional<std::string>(path);
        if (!v) return def;
        auto xs = detail::parse_list(*v, path);
        require(xs.size() == 1, "config: " + path + " must be a single number");
        return xs[0];
    };
    auto integer = [&](const std::string& path, long long def) {
        double x = num(path, double(def));
        require(x == std::floor(x) && std::abs(x) < 9e15, "config: " + path + " must be an integer");
        return (long long)x;
    };
    auto str = [&](const std::string& path, const std::string& def) { return tree.get<std::string>(path, def); };
    auto boolean = [&](const std::string& path, bool def) {
        std::string s = str(path, def ? "true" : "false");
        require(s == "true" || s == "false", "config: " + path + " must be true or false");
        return s == "true";
    };

    RunConfig c;
    auto& p = c.model;
    p.m = num("model.m", p.m);
    p.eps1 = num("model.eps1", p.eps1);
    p.eps2 = num("model.eps2", p.eps2);
    p.kap1 = num("model.kap1", p.kap1);
    p.kap2 = num("model.kap2", p.kap2);
    p.gam1 = num("model.gam1", p.gam1);
    p.gam2 = num("model.gam2", p.gam2);
    p.tau = num("model.tau", p.tau);
    p.M = num("model.M", p.M);
    p.d = int(integer("grid.d", 1));
    p.validate();

    int n = int(integer("grid.n", 64));
    double L = num("grid.L", 10.0);
    require(n >= 2, "config: grid.n must be at least 2");
    require(L > 0, "config: grid.L must be positive");
    c.grid = GridSpec(p.d, n, L, num("grid.origin", -0.5 * L));

    c.ot.epsilon = num("ot.epsilon", 0.0);
    if (tree.get_optional<std::string>("ot.epsilon_over_h2")) {
        require(!tree.get_optional<std::string>("ot.epsilon"), "config: set ot.epsilon or ot.epsilon_over_h2, not both");
        c.ot.epsilon = num("ot.epsilon_over_h2", 1.0) * c.grid.h() * c.grid.h();
    }
    require(c.ot.epsilon >= 0, "config: ot.epsilon must be nonnegative");
    c.ot.max_iter = int(integer("ot.max_iter", c.ot.max_iter));
    c.ot.marginal_tol = num("ot.marginal_tol", c.ot.marginal_tol);
    c.ot.eps_scaling = num("ot.eps_scaling", c.ot.eps_scaling);
    require(c.ot.eps_scaling > 0 && c.ot.eps_scaling < 1, "config: ot.eps_scaling must lie in (0, 1)");
    require(c.ot.marginal_tol > 0, "config: ot.marginal_tol must be positive");

    c.inner.max_outer = int(integer("inner.max_outer", c.inner.max_outer));
    c.inner.tol_u = num("inner.tol_u", c.inner.tol_u);
    c.inner.tol_obj = num("inner.tol_obj", c.inner.tol_obj);
    c.inner.anneal = boolean("inner.anneal", c.inner.anneal);
    c.inner.ref_weight = num("inner.ref_weight", c.inner.ref_weight);
    require(c.inner.max_outer >= 1, "config: inner.max_outer must be positive");
    require(c.inner.tol_u > 0, "config: inner.tol_u must be positive");
    require(c.inner.ref_weight > 0, "config: inner.ref_weight must be positive");

    auto& ic = c.initial;
    ic.u = str("initial.u", ic.u);
    static const std::set<std::string> us{"gaussian_bump", "cos2_bump", "two_bumps", "uniform", "from_file"};
    require(us.count(ic.u), "config: initial.u must be one of gaussian_bump, cos2_bump, two_bumps, uniform, from_file");
    auto point = [&](const std::string& path) {
        auto v = tree.get_optional<std::string>(path);
        if (!v) return std::vector<double>(p.d, c.grid.center());
        auto xs = detail::parse_list(*v, path);
        require(int(xs.size()) == p.d, "config: " + path + " needs " + std::to_string(p.d) + " coordinates");
        return xs;
    };
    ic.center = point("initial.center");
    ic.center2 = point("initial.center2");
    ic.width = num("initial.width", ic.width);
    ic.width2 = num("initial.width2", ic.width2);
    ic.weight2 = num("initial.weight2", ic.weight2);
    require(ic.width > 0 && ic.width2 > 0, "config: initial widths must be positive");
    require(ic.weight2 >= 0, "config: initial.weight2 must be nonnegative");
    ic.path = str("initial.path", "");
    require(ic.u != "from_file" || !ic.path.empty(), "config: initial.u = from_file needs initial.path");
    ic.v = str("initial.v", ic.v);
    require(ic.v == "zero" || ic.v == "gaussian" || ic.v == "equilibrium",
            "config: initial.v must be zero, gaussian or equilibrium");
    ic.v_amp = num("initial.v_amp", ic.v_amp);
    ic.v_width = num("initial.v_width", ic.v_width);
    require(ic.v_width > 0, "config: initial.v_width must be positive");
    ic.w = str("initial.w", ic.w);
    require(ic.w == "zero" || ic.w == "scaled" || ic.w == "coupled" || ic.w == "equilibrium",
            "config: initial.w must be zero, scaled, coupled or equilibrium");
    require((ic.v != "equilibrium" && ic.w != "equilibrium") || (p.gam1 > 0 && p.gam2 > 0),
            "config: equilibrium fields need gam1 > 0 and gam2 > 0");
    ic.w_scale = num("initial.w_scale", ic.w_scale);
    ic.mollify = boolean("initial.mollify", ic.mollify);

    c.horizon_T = num("run.T", c.horizon_T);
    require(c.horizon_T > 0, "config: run.T must be positive");
    c.snapshot_every = int(integer("run.snapshot_every", 0));
    require(c.snapshot_every >= 0, "config: run.snapshot_every must be nonnegative");
    c.output_dir = str("run.output_dir", c.output_dir);
    long long seed = integer("run.seed", 0);
    require(seed >= 0, "config: run.seed must be nonnegative");
    c.seed = std::uint64_t(seed);
    c.tol_step = num("run.tol_step", c.tol_step);
    require(c.tol_step >= 0, "config: run.tol_step must be nonnegative");
    c.tol_audit = num("run.tol_audit", c.tol_audit);
    if (auto s = tree.get_optional<std::string>("run.de_giorgi_fractions"))
        c.de_giorgi_fractions = detail::parse_list(*s, "run.de_giorgi_fractions");
    double last = 0;
    for (double f : c.de_giorgi_fractions) {
        require(f > last && f <= 1, "config: run.de_giorgi_fractions must ascend within (0, 1]");
        last = f;
    }
    if (auto s = tree.get_optional<std::string>("run.gate_taus")) c.gate_taus = detail::parse_list(*s, "run.gate_taus");
    for (double t : c.gate_taus) require(t > 0, "config: run.gate_taus entries must be positive");

    c.critical_max_outer = int(integer("critical.max_outer", c.critical_max_outer));
    c.critical_tol = num("critical.tol", c.critical_tol);
    require(c.critical_max_outer >= 1 && c.critical_tol > 0, "config: [critical] needs max_outer >= 1 and tol > 0");
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "config: cannot open " + path);
    return parse_config(in);
}

// parameters needed to re-audit a ledger, as "key=value" comment lines
inline std::vector<std::string> params_comments(const ModelParams& p) {
    return {"m=" + format_num(p.m),       "eps1=" + format_num(p.eps1), "eps2=" + format_num(p.eps2),
            "kap1=" + format_num(p.kap1), "kap2=" + format_num(p.kap2), "gam1=" + format_num(p.gam1),
            "gam2=" + format_num(p.gam2), "tau=" + format_num(p.tau),   "M=" + format_num(p.M),
            "d=" + std::to_string(p.d)};
}

inline ModelParams params_from_comments(const std::vector<std::string>& comments) {
    std::map<std::string, std::string> kv;
    for (const auto& c : comments) {
        auto eq = c.find('=');
        if (eq != std::string::npos && c.find(' ') == std::string::npos) kv[c.substr(0, eq)] = c.substr(eq + 1);
    }
    for (const char* k : {"m", "eps1", "eps2", "kap1", "kap2", "gam1", "gam2", "tau", "M", "d"})
        require(kv.count(k), std::string("ledger: header lacks parameter ") + k);
    ModelParams p;
    p.m = std::stod(kv["m"]);
    p.eps1 = std::stod(kv["eps1"]);
    p.eps2 = std::stod(kv["eps2"]);
    p.kap1 = std::stod(kv["kap1"]);
    p.kap2 = std::stod(kv["kap2"]);
    p.gam1 = std::stod(kv["gam1"]);
    p.gam2 = std::stod(kv["gam2"]);
    p.tau = std::stod(kv["tau"]);
    p.M = std::stod(kv["M"]);
    p.d = std::stoi(kv["d"]);
    return p;
}

}  // namespace chimera
