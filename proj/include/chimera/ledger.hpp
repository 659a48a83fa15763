#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "energy.hpp"

namespace chimera {

struct SlopeDiagnostic {
    double lhs = 0;  // (int |grad u^m - u grad v|^2 / u)^(1/2) over u > u_floor
    double rhs = 0;  // W2(u^k, u^(k-1)) / tau
    double ratio = 0;
};

struct DeGiorgiSample {
    double sigma = 0;
    double w2_from_prev = 0;
    double slope_lhs = 0;
};

struct StepRecord {
    int k = 0;
    double time = 0;
    double w2_sq_over_2tau = 0;
    double D = 0;
    double L_before = 0, L_after = 0;
    SlopeDiagnostic slope;
    double dH1_sq = 0;
    NormBundle norms;
    // not part of the CSV
    double resid_grad_sq = 0;  // |grad(kap1 Lap v - gam1 v + w)|^2 at step k
    double resid_sq = 0;       // |kap1 Lap v - gam1 v + w|^2 at step k
    std::vector<DeGiorgiSample> de_giorgi;
};

struct EnergyLedger {
    EnergyReport initial;
    std::vector<StepRecord> records;
    ModelParams params;
};

// frozen column order
inline const std::vector<std::string>& ledger_columns() {
    static const std::vector<std::string> c{"k",        "time",         "w2_sq_over_2tau", "D",       "L_before",
                                            "L_after",  "slope_lhs",    "slope_rhs",       "dH1_sq",  "u_L1",
                                            "u_Lm",     "u_L2",         "grad_um_norm",    "v_W22",   "v_W32",
                                            "w_H1",     "w_W22",        "second_moment"};
    return c;
}

inline std::vector<double> record_row(const StepRecord& r) {
    return {double(r.k),      r.time,          r.w2_sq_over_2tau, r.D,            r.L_before,     r.L_after,
            r.slope.lhs,      r.slope.rhs,     r.dH1_sq,          r.norms.u_L1,   r.norms.u_Lm,   r.norms.u_L2,
            r.norms.grad_um,  r.norms.v_W22,   r.norms.v_W32,     r.norms.w_H1,   r.norms.w_W22,  r.norms.second_moment};
}

inline std::string format_num(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline void write_csv_header(std::ostream& os, const std::vector<std::string>& comments = {}) {
    for (const auto& c : comments) os << "# " << c << "\n";
    const auto& cols = ledger_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
}

inline void write_csv_row(std::ostream& os, const StepRecord& r) {
    auto row = record_row(r);
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_num(row[i]);
    os << "\n";
}

struct ParsedLedger {
    std::vector<std::string> comments;
    std::vector<std::vector<double>> rows;
};

// strict reader: every frozen column must be present, in order
inline ParsedLedger read_ledger_csv(const std::string& path) {
    std::ifstream in(path);
    require(bool(in), "ledger: cannot open " + path);
    ParsedLedger out;
    std::string line;
    bool header = false;
    const auto& cols = ledger_columns();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            out.comments.push_back(line.substr(line.find_first_not_of("# ")));
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cells.push_back(c);
        if (!header) {
            for (std::size_t i = 0; i < cols.size(); ++i)
                require(i < cells.size() && cells[i] == cols[i], "ledger: missing column " + cols[i]);
            require(cells.size() == cols.size(), "ledger: unexpected extra columns");
            header = true;
            continue;
        }
        require(cells.size() == cols.size(), "ledger: short row");
        std::vector<double> row;
        for (auto& x : cells) row.push_back(std::stod(x));
        out.rows.push_back(std::move(row));
    }
    require(header, "ledger: header row missing");
    return out;
}

struct AuditResult {
    double lhs = 0, rhs = 0, gap = 0;
    bool pass = false;
};

// sum of W2^2/2tau + D against L_0 - L_N
inline AuditResult audit_prop_ED(const EnergyLedger& led, double tol_audit = -1) {
    require(!led.records.empty(), "audit: empty ledger");
    AuditResult a;
    for (const auto& r : led.records) a.lhs += r.w2_sq_over_2tau + r.D;
    double L0 = led.records.front().L_before, LN = led.records.back().L_after;
    a.rhs = L0 - LN;
    a.gap = a.rhs - a.lhs;
    double tol = tol_audit >= 0 ? tol_audit : 1e-3 * std::abs(L0);
    a.pass = a.lhs <= a.rhs + tol;
    return a;
}

struct EnergyInequalityAudit {
    double slope_term = 0;       // int |grad u^m - u grad v|^2/u dt at the step values
    double de_giorgi_term = 0;   // same along the interpolation
    double grad_resid_term = 0;  // (eps1 kap2 + eps2 kap1)/eps1^2 int |grad(kap1 Lap v - gam1 v + w)|^2 dt
    double resid_term = 0;       // (gam1 eps2 + gam2 eps1)/eps1^2 int |kap1 Lap v - gam1 v + w|^2 dt
    AuditResult pre;             // halves on the two Fisher-type integrals
    AuditResult theorem;         // coefficient one on the step-value integral, no interpolation term
};

inline EnergyInequalityAudit audit_energy_inequality(const EnergyLedger& led, double tol_audit = -1) {
    require(!led.records.empty(), "audit: empty ledger");
    const auto& p = led.params;
    EnergyInequalityAudit a;
    for (const auto& r : led.records) {
        a.slope_term += p.tau * r.slope.lhs * r.slope.lhs;
        require(!r.de_giorgi.empty(), "audit: step " + std::to_string(r.k) + " has no interpolation samples");
        // trapezoid over the sampled sub-steps, constant continuation down to sigma = 0
        const auto& s = r.de_giorgi;
        double integral = s.front().sigma * s.front().slope_lhs * s.front().slope_lhs;
        for (std::size_t i = 1; i < s.size(); ++i)
            integral += 0.5 * (s[i].sigma - s[i - 1].sigma) *
                        (s[i].slope_lhs * s[i].slope_lhs + s[i - 1].slope_lhs * s[i - 1].slope_lhs);
        a.de_giorgi_term += integral;
        a.grad_resid_term += p.tau * r.resid_grad_sq;
        a.resid_term += p.tau * r.resid_sq;
    }
    a.grad_resid_term *= (p.eps1 * p.kap2 + p.eps2 * p.kap1) / (p.eps1 * p.eps1);
    a.resid_term *= (p.gam1 * p.eps2 + p.gam2 * p.eps1) / (p.eps1 * p.eps1);
    double L0 = led.records.front().L_before, LN = led.records.back().L_after;
    double tol = tol_audit >= 0 ? tol_audit : 1e-3 * std::abs(L0);
    auto fill = [&](AuditResult& r, double lhs) {
        r.lhs = lhs;
        r.rhs = L0 - LN;
        r.gap = r.rhs - r.lhs;
        r.pass = r.lhs <= r.rhs + tol;
    };
    fill(a.pre, 0.5 * a.slope_term + 0.5 * a.de_giorgi_term + a.grad_resid_term + a.resid_term);
    fill(a.theorem, a.slope_term + a.grad_resid_term + a.resid_term);
    return a;
}

}  // namespace chimera
