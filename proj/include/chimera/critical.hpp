#pragma once

#include <boost/math/tools/roots.hpp>
#include <boost/rational.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "energy.hpp"
#include "grid.hpp"
#include "ledger.hpp"
#include "model.hpp"
#include "spectral.hpp"

namespace chimera {

using Rational = boost::rational<long long>;

// comparisons below stay within Rational: mixed int/rational operators recurse under C++20 with this Boost

// continued-fraction recovery of a rational from a double; exact round trip required
inline Rational to_rational(double x, long long max_den = 100000) {
    require(std::isfinite(x), "to_rational: non-finite value");
    long long h0 = 0, h1 = 1, k0 = 1, k1 = 0;
    double r = x;
    for (int it = 0; it < 64; ++it) {
        double a = std::floor(r);
        long long ai = (long long)a;
        long long h2 = ai * h1 + h0, k2 = ai * k1 + k0;
        if (k2 > max_den) break;
        h0 = h1, h1 = h2, k0 = k1, k1 = k2;
        if (std::abs(double(h1) / double(k1) - x) <= 1e-14 * std::max(1.0, std::abs(x))) break;
        double frac = r - a;
        if (frac == 0) break;
        r = 1 / frac;
    }
    require(k1 != 0 && std::abs(double(h1) / double(k1) - x) <= 1e-12 * std::max(1.0, std::abs(x)),
            "to_rational: value " + format_num(x) + " is not a small rational");
    return Rational(h1, k1);
}

inline double to_double(const Rational& r) { return double(r.numerator()) / double(r.denominator()); }

enum class ExponentRegime { subcritical, critical, supercritical };

inline const char* regime_name(ExponentRegime r) {
    switch (r) {
        case ExponentRegime::subcritical: return "subcritical";
        case ExponentRegime::critical: return "critical";
        default: return "supercritical";
    }
}

struct CriticalExponents {
    Rational m;
    int d = 0;
    Rational theta, one_minus_theta;
    Rational p_star, q_star;
    ExponentRegime regime = ExponentRegime::subcritical;
    bool uniform_L2_ok = false;
    // m > 2d/(d+4) and m < d/2, each also evaluated through its equivalent form
    bool above_lower = false, below_upper = false;
    // exponents of |u|_1 and |u|_m in the sharp-constant ratio; they sum to 2
    Rational l1_power, lm_power;
};

inline CriticalExponents exponents(const Rational& m, int d) {
    const Rational one(1);
    require(m > one, "exponents: m must exceed 1");
    require(d >= 5, "exponents: d must be at least 5 (got " + std::to_string(d) + "); theta needs d > 4");
    CriticalExponents e;
    e.m = m;
    e.d = d;
    const Rational D(d), two(2), four(4);
    e.theta = m * (D - four) / (two * D * (m - one));
    e.one_minus_theta = (four * m - (two - m) * D) / (two * D * (m - one));
    require(e.theta + e.one_minus_theta == one, "exponents: theta and 1 - theta do not add up");

    const Rational crit = two - four / D;
    e.regime = m > crit ? ExponentRegime::subcritical
                        : (m == crit ? ExponentRegime::critical : ExponentRegime::supercritical);
    e.p_star = m < two ? two * (D - two * m) / (D * (two - m)) : two;
    e.q_star = std::min(two, e.p_star);
    e.uniform_L2_ok = m >= two || (four * m + two * (m - one) * D) / (D * (two - m)) >= two;

    e.above_lower = m > two * D / (D + four);
    e.below_upper = m < D / two;
    if (m < two) {
        bool alt_lower = four * m / (D * (two - m)) > one;
        bool alt_upper = (four * m - two * (m - one) * D) / (two * D * (two - m)) < one;
        require(alt_lower == e.above_lower, "exponents: lower equivalence broken");
        require(alt_upper == e.below_upper, "exponents: upper equivalence broken");
    }
    require(crit >= two * D / (D + four), "exponents: 2 - 4/d below 2d/(d+4)");
    e.l1_power = two * e.one_minus_theta;
    e.lm_power = two * e.theta;
    return e;
}

inline CriticalExponents exponents(double m, int d) { return exponents(to_rational(m), d); }

inline double lm_norm(const Field& u, double m) {
    double s = 0;
    for (double x : u.values) s += std::pow(std::max(x, 0.0), m);
    return std::pow(s * u.grid.cell_volume(), 1 / m);
}

// int (u - mean) (-Lap)^-2 (u - mean)
inline double biharmonic_pairing(const Field& u) {
    Field c = u;
    const double mu = u.mean();
    for (double& x : c.values) x -= mu;
    return dot(c, biharmonic_inverse(c));
}

inline double sharp_ratio(const Field& u, const CriticalExponents& e) {
    double l1 = 0;
    for (double x : u.values) l1 += std::abs(x);
    l1 *= u.grid.cell_volume();
    return biharmonic_pairing(u) /
           (std::pow(l1, to_double(e.l1_power)) * std::pow(lm_norm(u, to_double(e.m)), to_double(e.lm_power)));
}

inline double m_star_from(double C_star_sq, int d, double kap1, double kap2) {
    require(d > 4, "m_star_from: d must exceed 4");
    require(C_star_sq > 0, "m_star_from: C_star_sq must be positive");
    return std::pow(2.0 * d / (d - 4) * kap1 * kap2 / C_star_sq, d / 4.0);
}

struct CriticalMassEstimate {
    double C_star_sq = 0;
    double M_star = 0;
    int iterations = 0;
    double fixed_point_residual = 0;
    bool converged = false;
    bool critical = false;  // false: m is not 2 - 4/d, the number is a ratio only
    GridSpec grid;
    Field u;                     // maximizing density
    std::vector<double> history; // ratio after each outer iteration
};

namespace detail {

// argmax over u >= 0 of mass M of int u v / |u|_m^theta: u = c (v - beta)_+^(1/(m-1)), where the
// first-order condition pins beta = (1 - theta) int u v / M
inline Field best_density_for(const Field& v, double M, double theta, double m) {
    const double hd = v.grid.cell_volume();
    const double q = 1 / (m - 1);
    auto density = [&](double beta) {
        Field u(v.grid);
        double s = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            double t = v[i] - beta;
            u[i] = t > 0 ? std::pow(t, q) : 0.0;
            s += u[i];
        }
        u *= M / (s * hd);
        return u;
    };
    auto f = [&](double beta) { return beta - (1 - theta) * dot(density(beta), v) / M; };
    const double vmax = v.max(), vmin = v.min(), span = std::max(vmax - vmin, 1e-300);
    require(vmax > vmin, "estimate_C_star: potential is constant");
    double hi = vmax - 1e-12 * span;
    double lo = vmin - span;
    for (int it = 0; it < 60 && f(lo) > 0; ++it) lo -= span * std::pow(2.0, it);
    require(f(lo) <= 0 && f(hi) >= 0, "estimate_C_star: cannot bracket the level");
    boost::uintmax_t iters = 200;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return density(0.5 * (r.first + r.second));
}

inline Field zero_mean(Field f) {
    const double mu = f.mean();
    for (double& x : f.values) x -= mu;
    return f;
}

}  // namespace detail

// Alternating maximization of the sharp-constant ratio. Given u, the best v is (-Lap)^-2 (u - mean);
// given v, the best u of mass M is the closed form above. The residual is the torus form of
//   (A int u v) (u - mean) = (-Lap)^2 v,  A = 1 / int u (-Lap)^-2 u,
// with v built from the previous iterate, normalized by |(-Lap)^2 v|_2.
// A uniform start has v = 0. It is seeded with prod_a (1 + cos(2 pi (x_a - c) / L)), c the box center; a
// cosine along one axis alone keeps every iterate a function of that axis and stalls on a slab profile.
inline CriticalMassEstimate estimate_C_star(const GridSpec& g, const ModelParams& p, const DensityView& init_u,
                                            int max_outer = 500, double tol = 1e-6) {
    require(g.d() >= 5, "estimate_C_star: d must be at least 5 (got " + std::to_string(g.d()) + ")");
    require(init_u.grid() == g, "estimate_C_star: initial density lives on another grid");
    auto e = exponents(p.m, g.d());
    const double M = init_u.mass();
    const double theta = to_double(e.theta);

    Field u = init_u.clamped();
    if (u.max() - u.min() <= 1e-12 * u.max()) {
        for (std::size_t i = 0; i < u.size(); ++i)
            for (int a = 0; a < g.d(); ++a) {
                double x = g.coord(g.index_on_axis(i, a)) - g.center();
                u[i] *= 1 + std::cos(2 * std::numbers::pi * x / g.L());
            }
    }
    u *= M / u.integral();

    CriticalMassEstimate est;
    est.grid = g;
    est.critical = e.regime == ExponentRegime::critical;
    double best = sharp_ratio(u, e);
    Field best_u = u;
    for (int it = 1; it <= max_outer; ++it) {
        Field src = detail::zero_mean(u);  // (-Lap)^2 v
        Field v = biharmonic_inverse(src);
        Field un = detail::best_density_for(v, M, theta, to_double(e.m));
        double N = biharmonic_pairing(un);
        double c = dot(un, v) / N;
        Field r = detail::zero_mean(un) * c - src;
        est.fixed_point_residual = std::sqrt(dot(r, r) / dot(src, src));
        u = un;
        double ratio = sharp_ratio(u, e);
        est.history.push_back(ratio);
        est.iterations = it;
        if (ratio >= best) {
            best = ratio;
            best_u = u;
        }
        if (est.fixed_point_residual <= tol) {
            est.converged = true;
            break;
        }
    }
    est.u = best_u;
    est.C_star_sq = best;
    est.M_star = m_star_from(best, g.d(), p.kap1, p.kap2);
    return est;
}

inline std::string critical_report(const CriticalMassEstimate& est, const ModelParams& p) {
    std::ostringstream os;
    const GridSpec& g = est.grid;
    os << "C_star_sq=" << format_num(est.C_star_sq) << "\n"
       << "M_star=" << format_num(est.M_star) << "\n"
       << "residual=" << format_num(est.fixed_point_residual) << "\n"
       << "iterations=" << est.iterations << "\n"
       << "converged=" << (est.converged ? "true" : "false") << "\n"
       << "interpretation=" << (est.critical ? "critical-mass" : "ratio only") << "\n"
       << "m=" << format_num(p.m) << "\n"
       << "kap1=" << format_num(p.kap1) << "\n"
       << "kap2=" << format_num(p.kap2) << "\n"
       << "grid=d" << g.d() << " n" << g.n() << " L" << format_num(g.L()) << " origin" << format_num(g.origin())
       << "\n";
    return os.str();
}

// L without the gamma terms
inline double eval_L0(const DensityView& u, const Field& v, const Field& w, const ModelParams& p) {
    Field lap = laplacian(v);
    Field r = lap * p.kap1 + w;
    return internal_energy(u.field(), p.m) - dot(u.field(), v) + 0.5 * p.kap1 * p.kap2 * dot(lap, lap) +
           p.eps2 / (2 * p.eps1) * dot(r, r);
}

namespace detail {

// row i: trigonometric interpolation weights for the value at lambda * x_i, zero when that point leaves the box
inline std::vector<double> dilation_matrix(const GridSpec& g, double lambda) {
    const int n = g.n();
    const double L = g.L(), c = g.center();
    std::vector<double> A(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        double y = c + lambda * (g.coord(i) - c);
        if (y < g.origin() || y >= g.origin() + L) continue;
        for (int j = 0; j < n; ++j) {
            double t = 2 * std::numbers::pi * (y - g.coord(j)) / L;
            double s = 1;
            for (int k = 1; 2 * k < n; ++k) s += 2 * std::cos(k * t);
            if (n % 2 == 0) s += std::cos(n / 2 * t);
            A[std::size_t(i) * n + j] = s / n;
        }
    }
    return A;
}

inline Field apply_per_axis(const Field& f, const std::vector<double>& A) {
    const GridSpec& g = f.grid;
    const int n = g.n();
    Field cur = f;
    std::vector<double> line(n), out(n);
    for (int a = 0; a < g.d(); ++a) {
        const std::size_t st = g.stride(a);
        Field next(g);
        for (std::size_t base = 0; base < g.size(); ++base) {
            if (g.index_on_axis(base, a) != 0) continue;
            for (int j = 0; j < n; ++j) line[j] = cur[base + j * st];
            for (int i = 0; i < n; ++i) {
                double s = 0;
                const double* row = &A[std::size_t(i) * n];
                for (int j = 0; j < n; ++j) s += row[j] * line[j];
                next[base + i * st] = s;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace detail

struct ScaledTriple {
    Field U, V, W;
    double lambda = 1;
    // measured / predicted for |U|_1, |U|_m^m and |Lap V|_2^2
    double l1_ratio = 0, lm_ratio = 0, lap_ratio = 0;
    bool within(double tol) const {
        return std::abs(l1_ratio - 1) <= tol && std::abs(lm_ratio - 1) <= tol && std::abs(lap_ratio - 1) <= tol;
    }
};

// (lambda^d U(lambda x), lambda^(d-4) V(lambda x), lambda^(d-2) W(lambda x)) about the box center,
// by spectral interpolation. The dilated support must stay inside the box.
inline ScaledTriple scaling_family(const Field& U, const Field& V, const Field& W, double lambda, double m) {
    require(lambda > 0, "scaling_family: lambda must be positive");
    const GridSpec& g = U.grid;
    require(V.grid == g && W.grid == g, "scaling_family: fields on different grids");
    // every nonzero sample must land where the dilated box still covers it
    const double half = 0.5 * lambda * g.L();
    const double c = g.center();
    double peak = 0;
    for (const Field* f : {&U, &V, &W}) peak = std::max(peak, sup_norm(*f));
    for (const Field* f : {&U, &V, &W})
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (std::abs((*f)[i]) <= 1e-12 * peak) continue;
            for (int a = 0; a < g.d(); ++a)
                require(std::abs(g.coord(g.index_on_axis(i, a)) - c) <= half,
                        "scaling_family: rescaled support wraps around the box");
        }
    const int d = g.d();
    auto A = detail::dilation_matrix(g, lambda);
    ScaledTriple s;
    s.lambda = lambda;
    s.U = detail::apply_per_axis(U, A) * std::pow(lambda, d);
    s.V = detail::apply_per_axis(V, A) * std::pow(lambda, d - 4);
    s.W = detail::apply_per_axis(W, A) * std::pow(lambda, d - 2);
    auto l1 = [](const Field& f) {
        double t = 0;
        for (double x : f.values) t += std::abs(x);
        return t * f.grid.cell_volume();
    };
    auto lmm = [&](const Field& f) { return std::pow(lm_norm(f, m), m); };
    auto lap2 = [](const Field& f) {
        Field l = laplacian(f);
        return dot(l, l);
    };
    s.l1_ratio = l1(s.U) / l1(U);
    s.lm_ratio = lmm(s.U) / (std::pow(lambda, d * (m - 1)) * lmm(U));
    s.lap_ratio = lap2(s.V) / (std::pow(lambda, d - 4) * lap2(V));
    return s;
}

// alpha balancing the two Young terms, and the triple (U, V/alpha, -kap1 Lap V/alpha)
struct NormalizedTriple {
    Field U, V, W;
    double alpha = 0;
};

inline NormalizedTriple critical_triple(const Field& U, const Field& V, double C_star, const ModelParams& p) {
    require(C_star > 0, "critical_triple: C_star must be positive");
    auto e = exponents(p.m, U.grid.d());
    Field lap = laplacian(V);
    double M = U.integral();
    double alpha = p.kap1 * p.kap2 * std::sqrt(dot(lap, lap)) /
                   (C_star * std::pow(M, to_double(e.one_minus_theta)) *
                    std::pow(lm_norm(U, p.m), to_double(e.theta)));
    NormalizedTriple t{U, V * (1 / alpha), lap * (-p.kap1 / alpha), alpha};
    return t;
}

// reader for the text written by critical_report
struct CriticalReport {
    double C_star_sq = 0, M_star = 0, residual = 0;
    int iterations = 0;
    bool converged = false;
    std::string interpretation;
    double m = 0, kap1 = 0, kap2 = 0;
    int d = 0, n = 0;
    double L = 0, origin = 0;
};

inline CriticalReport parse_critical_report(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, "report: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* k :
         {"C_star_sq", "M_star", "residual", "iterations", "converged", "interpretation", "m", "kap1", "kap2", "grid"})
        require(kv.count(k), std::string("report: missing ") + k);
    CriticalReport r;
    r.C_star_sq = std::stod(kv["C_star_sq"]);
    r.M_star = std::stod(kv["M_star"]);
    r.residual = std::stod(kv["residual"]);
    r.iterations = std::stoi(kv["iterations"]);
    require(kv["converged"] == "true" || kv["converged"] == "false", "report: converged must be true or false");
    r.converged = kv["converged"] == "true";
    r.interpretation = kv["interpretation"];
    r.m = std::stod(kv["m"]);
    r.kap1 = std::stod(kv["kap1"]);
    r.kap2 = std::stod(kv["kap2"]);
    std::istringstream gs(kv["grid"]);
    std::string a, b, c, e;
    require(bool(gs >> a >> b >> c >> e) && a[0] == 'd' && b[0] == 'n' && c[0] == 'L' && e.rfind("origin", 0) == 0,
            "report: malformed grid line");
    r.d = std::stoi(a.substr(1));
    r.n = std::stoi(b.substr(1));
    r.L = std::stod(c.substr(1));
    r.origin = std::stod(e.substr(6));
    return r;
}

}  // namespace chimera
