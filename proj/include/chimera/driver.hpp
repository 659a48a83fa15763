#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "critical.hpp"
#include "energy.hpp"
#include "ledger.hpp"
#include "norms.hpp"
#include "scheme.hpp"
#include "snapshot.hpp"

namespace chimera {

// process exit codes
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,          // bad arguments, unreadable or invalid config, unparseable artifacts
    exit_gate = 2,           // initial-energy gate refused the step size
    exit_invariant = 3,      // mass, positivity, finiteness or per-step Lyapunov check failed; dump written
    exit_inner = 4,          // inner u-step solver did not converge; dump written
    exit_audit = 5,          // final dissipation audit failed
    exit_not_converged = 6,  // critical-mass iteration hit its cap
    exit_selftest = 7,       // a selftest check failed
};

struct InitialTriple {
    DensityView u;  // as configured, before mollification
    Field v, w;
};

namespace detail {

inline double wrapped_r2(const GridSpec& g, const std::vector<double>& x, const std::vector<double>& c) {
    double r2 = 0;
    for (int a = 0; a < g.d(); ++a) {
        double dx = g.wrap(x[a] - c[a]);
        r2 += dx * dx;
    }
    return r2;
}

inline Field unit_mass(Field f) {
    double s = f.integral();
    require(s > 0, "initial: profile has no mass on this grid");
    f *= 1 / s;
    return f;
}

inline Field gaussian(const GridSpec& g, const std::vector<double>& c, double width) {
    return make_field(g, [&](const std::vector<double>& x) { return std::exp(-wrapped_r2(g, x, c) / (2 * width * width)); });
}

}  // namespace detail

inline InitialTriple build_initial(const RunConfig& c) {
    const GridSpec& g = c.grid;
    const auto& ic = c.initial;
    const auto& p = c.model;
    Field u(g);
    if (ic.u == "gaussian_bump") {
        u = detail::unit_mass(detail::gaussian(g, ic.center, ic.width));
    } else if (ic.u == "cos2_bump") {
        u = detail::unit_mass(make_field(g, [&](const std::vector<double>& x) {
            double r = std::sqrt(detail::wrapped_r2(g, x, ic.center)) / ic.width;
            return r < 1 ? std::pow(std::cos(0.5 * std::numbers::pi * r), 2) : 0.0;
        }));
    } else if (ic.u == "two_bumps") {
        u = detail::unit_mass(detail::gaussian(g, ic.center, ic.width)) +
            detail::unit_mass(detail::gaussian(g, ic.center2, ic.width2)) * ic.weight2;
    } else if (ic.u == "uniform") {
        u = Field(g, 1.0);
    } else {
        Snapshot s = read_snapshot(ic.path);
        require(s.field.grid == g, "initial: snapshot " + ic.path + " lives on another grid");
        u = s.field;
        for (double& x : u.values) x = std::max(x, 0.0);
    }
    u *= p.M / u.integral();

    const double ubar = p.M / g.volume();
    Field v(g);
    if (ic.v == "gaussian")
        v = make_field(g, [&](const std::vector<double>& x) {
            return ic.v_amp * std::exp(-detail::wrapped_r2(g, x, ic.center) / (ic.v_width * ic.v_width));
        });
    else if (ic.v == "equilibrium")
        v = Field(g, ubar / (p.gam1 * p.gam2));

    Field w(g);
    if (ic.w == "scaled")
        w = v * ic.w_scale;
    else if (ic.w == "coupled")
        w = v * p.gam1 - laplacian(v) * p.kap1;
    else if (ic.w == "equilibrium")
        w = Field(g, ubar / p.gam2);
    return InitialTriple{DensityView(u, p.M), v, w};
}

// empty when u is a valid density of mass M: finite, mass within 1e-10 relative, min >= -1e-9 max
inline std::string density_violation(const Field& u, double M) {
    if (!u.finite()) return "density has non-finite values";
    double mass = u.integral();
    if (std::abs(mass - M) > 1e-10 * std::abs(M))
        return "mass drifted to " + format_num(mass) + " (expected " + format_num(M) + ")";
    if (u.min() < -1e-9 * std::max(u.max(), 0.0)) return "density minimum " + format_num(u.min()) + " below tolerance";
    return {};
}

inline bool lyapunov_ok(double L_before, double L_after, double tol_step) {
    return L_after <= L_before + tol_step * (1 + std::abs(L_before));
}

inline double lyapunov_excess(double L_before, double L_after) {
    return (L_after - L_before) / (1 + std::abs(L_before));
}

struct RunOutcome {
    int exit_code = exit_ok;
    std::string message;
    EnergyLedger ledger;
    State final_state;
    InitialGate gate;
    bool audited = false;
    AuditResult prop_ed;
    EnergyInequalityAudit energy_inequality;
    double worst_lyapunov_excess = -INFINITY;  // max over steps of (L_after - L_before)/(1 + |L_before|)
    double worst_mass_rel = 0;
    double worst_neg_rel = 0;  // max over steps of -min/max
    int steps = 0;
};

inline std::string snapshot_stem(const std::string& dir, char field, int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c_%06d", field, k);
    return (std::filesystem::path(dir) / "snapshots" / buf).string();
}

inline void write_state(const std::string& dir, const State& s, const ModelParams& p) {
    write_snapshot(snapshot_stem(dir, 'u', s.k), s.u.field(), s.time, s.u.mass());
    write_snapshot(snapshot_stem(dir, 'v', s.k), s.v, s.time, p.M);
    write_snapshot(snapshot_stem(dir, 'w', s.k), s.w, s.time, p.M);
}

inline std::vector<std::string> ledger_comments(const RunConfig& c) {
    const auto& p = c.model;
    std::vector<std::string> out{"chimera ledger"};
    if (!p.inside_theorem_dimensions())
        out.push_back("d=" + std::to_string(p.d) + " outside theorem hypotheses (theory needs d >= 5)");
    out.push_back(std::string("regime ") + regime_name(p.regime()));
    for (auto& s : params_comments(p)) out.push_back(s);
    out.push_back("n=" + std::to_string(c.grid.n()));
    out.push_back("L=" + format_num(c.grid.L()));
    out.push_back("epsilon=" + format_num(c.ot.epsilon > 0 ? c.ot.epsilon : c.grid.h() * c.grid.h()));
    out.push_back("tol_step=" + format_num(c.tol_step));
    out.push_back("tol_audit=" + format_num(c.tol_audit));
    out.push_back("seed=" + std::to_string(c.seed));
    return out;
}

inline std::vector<std::string> diagnostics_columns(std::size_t n_sigma) {
    std::vector<std::string> c{"k", "resid_grad_sq", "resid_sq", "slope_ratio", "sweeps", "marginal_err"};
    for (std::size_t j = 1; j <= n_sigma; ++j)
        for (const char* s : {"sigma_", "w2_", "slope_lhs_"}) c.push_back(s + std::to_string(j));
    return c;
}

inline void write_diagnostics_row(std::ostream& os, const StepRecord& r, int sweeps, double marginal_err) {
    os << r.k << "," << format_num(r.resid_grad_sq) << "," << format_num(r.resid_sq) << "," << format_num(r.slope.ratio)
       << "," << sweeps << "," << format_num(marginal_err);
    for (const auto& s : r.de_giorgi)
        os << "," << format_num(s.sigma) << "," << format_num(s.w2_from_prev) << "," << format_num(s.slope_lhs);
    os << "\n";
}

inline std::string audit_summary(const RunOutcome& o) {
    std::ostringstream os;
    os << "steps=" << o.steps << "\n"
       << "worst_lyapunov_excess=" << format_num(o.worst_lyapunov_excess) << "\n"
       << "worst_mass_rel=" << format_num(o.worst_mass_rel) << "\n"
       << "worst_neg_rel=" << format_num(o.worst_neg_rel) << "\n";
    if (o.audited) {
        const auto& a = o.prop_ed;
        const auto& e = o.energy_inequality;
        os << "prop_ED_lhs=" << format_num(a.lhs) << "\nprop_ED_rhs=" << format_num(a.rhs)
           << "\nprop_ED_gap=" << format_num(a.gap) << "\nprop_ED_pass=" << (a.pass ? "true" : "false") << "\n"
           << "ei_slope_term=" << format_num(e.slope_term) << "\nei_de_giorgi_term=" << format_num(e.de_giorgi_term)
           << "\nei_grad_resid_term=" << format_num(e.grad_resid_term)
           << "\nei_resid_term=" << format_num(e.resid_term) << "\nei_pre_lhs=" << format_num(e.pre.lhs)
           << "\nei_pre_gap=" << format_num(e.pre.gap) << "\nei_pre_pass=" << (e.pre.pass ? "true" : "false")
           << "\nei_theorem_lhs=" << format_num(e.theorem.lhs) << "\nei_theorem_gap=" << format_num(e.theorem.gap)
           << "\nei_theorem_pass=" << (e.theorem.pass ? "true" : "false") << "\n";
    }
    os << "exit_code=" << o.exit_code << "\n";
    if (!o.message.empty()) os << "message=" << o.message << "\n";
    return os.str();
}

// The whole simulation. With out_dir empty nothing touches the disk. Hard invariants: density validity after
// every step, the per-step Lyapunov check and the final dissipation audit. The energy-inequality audit is
// reported but does not set the exit code (its step-value form sits at equality to leading order).
// on_step sees every accepted step together with the state it started from.
using StepObserver = std::function<void(const State& prev, const StepResult& step)>;

inline RunOutcome run_simulation(const RunConfig& c, const std::string& out_dir = {}, std::ostream* log = nullptr,
                                 const StepObserver& on_step = {}) {
    RunOutcome o;
    const ModelParams& p = c.model;
    p.validate();
    InitialTriple init = build_initial(c);

    o.gate = initial_gate(init.u, init.v, init.w, p, c.gate_taus);
    if (!o.gate.pass) {
        o.exit_code = exit_gate;
        std::ostringstream m;
        m << "initial-energy gate: L(mollified) = " << format_num(o.gate.L_mollified) << " exceeds L(raw) + 1 = "
          << format_num(o.gate.L_raw + 1) << " at tau = " << format_num(p.tau) << "; ";
        if (o.gate.tau_star > 0)
            m << "tau = " << format_num(o.gate.tau_star) << " passes";
        else
            m << "shrink tau (list candidates in run.gate_taus to have them probed)";
        o.message = m.str();
        return o;
    }

    DensityView u0 = c.initial.mollify ? mollify_initial(init.u, p.tau) : init.u;
    State s = initial_state(u0, init.v, init.w, p);
    double L = eval_L(s.u, s.v, s.w, p).L;
    o.ledger.params = p;
    o.ledger.initial = eval_L(s.u, s.v, s.w, p);

    const bool disk = !out_dir.empty();
    std::ofstream ledger_os, diag_os;
    if (disk) {
        std::filesystem::create_directories(std::filesystem::path(out_dir) / "snapshots");
        ledger_os.open(std::filesystem::path(out_dir) / "ledger.csv");
        diag_os.open(std::filesystem::path(out_dir) / "diagnostics.csv");
        require(bool(ledger_os) && bool(diag_os), "run: cannot write into " + out_dir);
        write_csv_header(ledger_os, ledger_comments(c));
        auto dc = diagnostics_columns(c.de_giorgi_fractions.size());
        for (std::size_t i = 0; i < dc.size(); ++i) diag_os << (i ? "," : "") << dc[i];
        diag_os << "\n";
        write_state(out_dir, s, p);
    }

    auto dump = [&](const std::string& why, const State* bad) {
        o.message = why;
        if (!disk) return;
        ledger_os.flush();
        diag_os.flush();
        std::ofstream a(std::filesystem::path(out_dir) / "abort.txt");
        a << "step=" << s.k + 1 << "\nreason=" << why << "\n";
        write_snapshot((std::filesystem::path(out_dir) / "abort_prev_u").string(), s.u.field(), s.time, s.u.mass());
        write_snapshot((std::filesystem::path(out_dir) / "abort_prev_v").string(), s.v, s.time, p.M);
        write_snapshot((std::filesystem::path(out_dir) / "abort_prev_w").string(), s.w, s.time, p.M);
        if (bad) {
            write_snapshot((std::filesystem::path(out_dir) / "abort_bad_u").string(), bad->u.field(), bad->time,
                           bad->u.mass());
            write_snapshot((std::filesystem::path(out_dir) / "abort_bad_v").string(), bad->v, bad->time, p.M);
        }
    };

    StepOptions opt;
    opt.de_giorgi_fractions = c.de_giorgi_fractions;
    const int N = c.step_count();
    for (int k = 1; k <= N; ++k) {
        StepResult r;
        try {
            r = full_step(s, p, c.ot, c.inner, L, opt);
        } catch (const InnerNonConvergence& e) {
            o.exit_code = exit_inner;
            dump(std::string("step ") + std::to_string(k) + ": " + e.what(), nullptr);
            o.final_state = s;
            return o;
        } catch (const Error& e) {
            // a density constructor refused a step result
            o.exit_code = exit_invariant;
            dump(std::string("step ") + std::to_string(k) + ": " + e.what(), nullptr);
            o.final_state = s;
            return o;
        }
        const StepRecord& rec = r.record;
        o.ledger.records.push_back(rec);
        o.steps = k;
        if (disk) {
            write_csv_row(ledger_os, rec);
            write_diagnostics_row(diag_os, rec, r.sweeps, r.tr.marginal_err);
        }
        const Field& uf = r.state.u.field();
        o.worst_mass_rel = std::max(o.worst_mass_rel, std::abs(uf.integral() - p.M) / p.M);
        o.worst_neg_rel = std::max(o.worst_neg_rel, -uf.min() / std::max(uf.max(), 1e-300));
        o.worst_lyapunov_excess = std::max(o.worst_lyapunov_excess, lyapunov_excess(rec.L_before, rec.L_after));

        std::string bad = density_violation(uf, p.M);
        if (bad.empty() && !(r.state.v.finite() && r.state.w.finite())) bad = "v or w has non-finite values";
        if (bad.empty() && !lyapunov_ok(rec.L_before, rec.L_after, c.tol_step))
            bad = "L rose from " + format_num(rec.L_before) + " to " + format_num(rec.L_after);
        if (!bad.empty()) {
            o.exit_code = exit_invariant;
            dump("step " + std::to_string(k) + ": " + bad, &r.state);
            o.final_state = s;
            return o;
        }
        if (on_step) on_step(s, r);
        s = r.state;
        L = rec.L_after;
        if (log)
            *log << "step " << k << "/" << N << " t=" << format_num(s.time) << " L=" << format_num(L)
                 << " W2/tau=" << format_num(rec.slope.rhs) << " slope_ratio=" << format_num(rec.slope.ratio) << "\n";
        if (disk && (k == N || (c.snapshot_every > 0 && k % c.snapshot_every == 0))) write_state(out_dir, s, p);
    }
    o.final_state = s;

    if (!o.ledger.records.empty()) {
        o.audited = true;
        o.prop_ed = audit_prop_ED(o.ledger, c.tol_audit);
        if (!c.de_giorgi_fractions.empty()) o.energy_inequality = audit_energy_inequality(o.ledger, c.tol_audit);
        if (!o.prop_ed.pass) {
            o.exit_code = exit_audit;
            o.message = "dissipation audit failed: lhs " + format_num(o.prop_ed.lhs) + " > rhs " +
                        format_num(o.prop_ed.rhs);
        }
    }
    if (disk) {
        std::ofstream a(std::filesystem::path(out_dir) / "audit.txt");
        a << audit_summary(o);
    }
    return o;
}

// ---- audit of persisted artifacts ----

struct DiskAudit {
    int exit_code = exit_ok;
    std::vector<std::string> problems;
    EnergyLedger ledger;
    AuditResult prop_ed;
    std::optional<EnergyInequalityAudit> energy_inequality;
    int snapshots_checked = 0;
    int energies_recomputed = 0;
};

namespace detail {

inline std::map<std::string, std::string> comment_values(const std::vector<std::string>& comments) {
    std::map<std::string, std::string> kv;
    for (const auto& c : comments) {
        auto eq = c.find('=');
        if (eq != std::string::npos && c.find(' ') == std::string::npos) kv[c.substr(0, eq)] = c.substr(eq + 1);
    }
    return kv;
}

inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path, const std::vector<std::string>& cols) {
    std::ifstream in(path);
    require(bool(in), "diagnostics: cannot open " + path);
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string x;
        while (std::getline(ss, x, ',')) cells.push_back(x);
        if (!header) {
            for (std::size_t i = 0; i < cols.size(); ++i)
                require(i < cells.size() && cells[i] == cols[i], "diagnostics: missing column " + cols[i]);
            require(cells.size() == cols.size(), "diagnostics: unexpected extra columns");
            header = true;
            continue;
        }
        require(cells.size() == cols.size(), "diagnostics: short row");
        std::vector<double> r;
        for (auto& c : cells) r.push_back(std::stod(c));
        rows.push_back(std::move(r));
    }
    require(header, "diagnostics: header row missing");
    return rows;
}

inline std::size_t diagnostics_sigma_count(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "diagnostics: cannot open " + path);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') {
            std::size_t commas = std::count(line.begin(), line.end(), ',');
            require(commas >= 5 && (commas - 5) % 3 == 0, "diagnostics: unexpected column count");
            return (commas - 5) / 3;
        }
    throw Error("diagnostics: header row missing");
}

}  // namespace detail

// Re-checks ledger.csv (and diagnostics.csv, snapshots/ when present) in `dir`.
// Throws Error for unreadable or malformed artifacts.
inline DiskAudit audit_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    DiskAudit a;
    ParsedLedger pl = read_ledger_csv((fs::path(dir) / "ledger.csv").string());
    ModelParams p = params_from_comments(pl.comments);
    auto kv = detail::comment_values(pl.comments);
    double tol_step = kv.count("tol_step") ? std::stod(kv["tol_step"]) : 1e-6;
    double tol_audit = kv.count("tol_audit") ? std::stod(kv["tol_audit"]) : -1;
    require(!pl.rows.empty(), "ledger: no step rows");

    a.ledger.params = p;
    for (const auto& row : pl.rows) {
        StepRecord r;
        r.k = int(row[0]);
        r.time = row[1];
        r.w2_sq_over_2tau = row[2];
        r.D = row[3];
        r.L_before = row[4];
        r.L_after = row[5];
        r.slope.lhs = row[6];
        r.slope.rhs = row[7];
        r.slope.ratio = r.slope.rhs > 0 ? r.slope.lhs / r.slope.rhs : 0;
        r.dH1_sq = row[8];
        r.norms.u_L1 = row[9];
        r.norms.u_Lm = row[10];
        r.norms.u_L2 = row[11];
        r.norms.grad_um = row[12];
        r.norms.v_W22 = row[13];
        r.norms.v_W32 = row[14];
        r.norms.w_H1 = row[15];
        r.norms.w_W22 = row[16];
        r.norms.second_moment = row[17];
        a.ledger.records.push_back(r);
    }

    auto problem = [&](const std::string& s) { a.problems.push_back(s); };
    const auto& R = a.ledger.records;
    for (std::size_t i = 0; i < R.size(); ++i) {
        const auto& r = R[i];
        if (r.k != int(i) + 1) problem("row " + std::to_string(i + 1) + ": step index " + std::to_string(r.k));
        if (i > 0 && r.L_before != R[i - 1].L_after)
            problem("step " + std::to_string(r.k) + ": L_before does not continue the previous L_after");
        if (!lyapunov_ok(r.L_before, r.L_after, tol_step))
            problem("step " + std::to_string(r.k) + ": L rose from " + format_num(r.L_before) + " to " +
                    format_num(r.L_after));
        if (r.D < 0) problem("step " + std::to_string(r.k) + ": negative dissipation");
        if (r.w2_sq_over_2tau < 0) problem("step " + std::to_string(r.k) + ": negative transport term");
        if (std::abs(r.norms.u_L1 - p.M) > 1e-10 * p.M)
            problem("step " + std::to_string(r.k) + ": u_L1 " + format_num(r.norms.u_L1) + " differs from M");
    }
    a.prop_ed = audit_prop_ED(a.ledger, tol_audit);
    if (!a.prop_ed.pass) problem("dissipation audit failed: gap " + format_num(a.prop_ed.gap));

    fs::path diag = fs::path(dir) / "diagnostics.csv";
    if (fs::exists(diag)) {
        std::size_t ns = detail::diagnostics_sigma_count(diag.string());
        auto rows = detail::read_numeric_csv(diag.string(), diagnostics_columns(ns));
        require(rows.size() == R.size(), "diagnostics: row count differs from the ledger");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto& r = a.ledger.records[i];
            require(int(rows[i][0]) == r.k, "diagnostics: step index mismatch at row " + std::to_string(i + 1));
            r.resid_grad_sq = rows[i][1];
            r.resid_sq = rows[i][2];
            for (std::size_t j = 0; j < ns; ++j)
                r.de_giorgi.push_back(DeGiorgiSample{rows[i][6 + 3 * j], rows[i][7 + 3 * j], rows[i][8 + 3 * j]});
        }
        if (ns > 0) a.energy_inequality = audit_energy_inequality(a.ledger, tol_audit);
    }

    // snapshots: density checks, and L recomputed wherever u, v, w were all stored
    fs::path sd = fs::path(dir) / "snapshots";
    if (fs::exists(sd)) {
        for (const auto& e : fs::directory_iterator(sd)) {
            std::string name = e.path().filename().string();
            if (name.size() != 12 || name[0] != 'u' || e.path().extension() != ".hdr") continue;
            int k = std::stoi(name.substr(2, 6));
            std::string stem = (sd / e.path().stem()).string();
            Snapshot su = read_snapshot(stem);
            ++a.snapshots_checked;
            std::string bad = density_violation(su.field, p.M);
            if (!bad.empty()) {
                problem("snapshot " + name + ": " + bad);
                continue;
            }
            std::string vs = snapshot_stem(dir, 'v', k), ws = snapshot_stem(dir, 'w', k);
            if (!fs::exists(vs + ".hdr") || !fs::exists(ws + ".hdr")) continue;
            if (k > int(R.size())) {
                problem("snapshot " + name + ": step beyond the ledger");
                continue;
            }
            double Lk = k == 0 ? R.front().L_before : R[k - 1].L_after;
            double Ls = eval_L(DensityView(su.field), read_snapshot(vs).field, read_snapshot(ws).field, p).L;
            ++a.energies_recomputed;
            if (std::abs(Ls - Lk) > 1e-9 * (1 + std::abs(Lk)))
                problem("step " + std::to_string(k) + ": ledger L " + format_num(Lk) + " disagrees with snapshots (" +
                        format_num(Ls) + ")");
        }
    }
    if (!a.problems.empty()) a.exit_code = a.prop_ed.pass ? exit_invariant : exit_audit;
    return a;
}

inline std::string disk_audit_summary(const DiskAudit& a) {
    std::ostringstream os;
    os << "steps=" << a.ledger.records.size() << "\n"
       << "prop_ED_lhs=" << format_num(a.prop_ed.lhs) << "\nprop_ED_rhs=" << format_num(a.prop_ed.rhs)
       << "\nprop_ED_gap=" << format_num(a.prop_ed.gap) << "\nprop_ED_pass=" << (a.prop_ed.pass ? "true" : "false")
       << "\n";
    if (a.energy_inequality) {
        const auto& e = *a.energy_inequality;
        os << "ei_pre_lhs=" << format_num(e.pre.lhs) << "\nei_pre_pass=" << (e.pre.pass ? "true" : "false")
           << "\nei_theorem_lhs=" << format_num(e.theorem.lhs)
           << "\nei_theorem_pass=" << (e.theorem.pass ? "true" : "false") << "\n";
    }
    os << "snapshots_checked=" << a.snapshots_checked << "\nenergies_recomputed=" << a.energies_recomputed << "\n";
    for (const auto& s : a.problems) os << "problem=" << s << "\n";
    os << "exit_code=" << a.exit_code << "\n";
    return os.str();
}

// ---- critical mass ----

struct CriticalRunOutcome {
    int exit_code = exit_ok;
    CriticalMassEstimate estimate;
    std::string report;
};

inline CriticalRunOutcome run_critical_mass(const RunConfig& c, const std::string& out_dir = {}) {
    require(c.grid.d() >= 5, "estimate-critical-mass: needs d >= 5 (got d=" + std::to_string(c.grid.d()) + ")");
    CriticalRunOutcome o;
    o.estimate = estimate_C_star(c.grid, c.model, uniform_density(c.grid, c.model.M), c.critical_max_outer,
                                 c.critical_tol);
    o.report = critical_report(o.estimate, c.model);
    o.exit_code = o.estimate.converged ? exit_ok : exit_not_converged;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream f(std::filesystem::path(out_dir) / "critical_report.txt");
        require(bool(f), "estimate-critical-mass: cannot write into " + out_dir);
        f << o.report;
    }
    return o;
}

}  // namespace chimera
