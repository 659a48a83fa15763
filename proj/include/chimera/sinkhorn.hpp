#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "grid.hpp"
#include "logkernel.hpp"

namespace chimera {

struct OtConfig {
    double epsilon = 0;  // 0 means h^2
    int max_iter = 20000;
    double marginal_tol = 1e-9;
    bool log_domain = true;
    bool debias = true;
    double eps_scaling = 0.5;  // ratio of the annealing ladder
};

// Costs are in mass units, i.e. M times the cost between the normalized measures.
struct TransportResult {
    double cost = 0;     // entropic cost of the pair
    double cost_xx = 0;  // self costs used for debiasing
    double cost_yy = 0;
    double divergence = 0;
    double w2 = 0;        // sqrt of the debiased divergence
    double sharp_cost = 0;  // transport cost <C, P> of the entropic plan, an upper bound on W2^2
    double w2_sharp = 0;
    double mass = 0;
    double epsilon = 0;
    Field f, g;  // dual potentials of the normalized problem
    bool converged = false;
    double marginal_err = 0;
    int iterations = 0;
};

namespace detail {

struct OtProblem {
    GridSpec grid;
    double eps;
    std::vector<double> loga, logb;
    AxisLogKernel K;

    std::vector<const AxisLogKernel*> plain() const { return std::vector<const AxisLogKernel*>(grid.d(), &K); }

    // -eps * log sum_j exp(logw_j + (pot_j - C_ij)/eps)
    std::vector<double> c_transform(const std::vector<double>& pot, const std::vector<double>& logw) const {
        std::vector<double> in(pot.size());
        for (std::size_t j = 0; j < pot.size(); ++j) in[j] = logw[j] + pot[j] / eps;
        auto o = log_convolve(grid, in, plain());
        for (double& x : o) x *= -eps;
        return o;
    }
};

inline std::vector<double> log_weights(const Field& f, double mass) {
    const double hd = f.grid.cell_volume();
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double p = std::max(f[i], 0.0) * hd / mass;
        out[i] = p > 0 ? std::log(p) : neg_inf;
    }
    return out;
}

inline double weighted(const std::vector<double>& pot, const std::vector<double>& logw) {
    double s = 0;
    for (std::size_t i = 0; i < pot.size(); ++i)
        if (logw[i] > neg_inf) s += std::exp(logw[i]) * pot[i];
    return s;
}

inline std::vector<double> eps_ladder(const GridSpec& g, double eps, double ratio) {
    std::vector<double> out;
    double e0 = std::max(eps, 0.25 * g.L() * g.L());
    for (double e = e0; e > eps; e *= ratio) out.push_back(e);
    out.push_back(eps);
    return out;
}

struct PairOutcome {
    std::vector<double> f, g;
    bool converged = false;
    double err = 0;
    int iters = 0;
};

// Plain scaling iterations at the target eps only. Kept for cross-checks at moderate eps.
inline PairOutcome solve_pair_plain(const GridSpec& g, const std::vector<double>& loga,
                                    const std::vector<double>& logb, const OtConfig& cfg, double eps) {
    const int n = g.n();
    std::vector<double> K(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double dx = g.wrap((i - j) * g.h());
            K[std::size_t(i) * n + j] = std::exp(-dx * dx / eps);
        }
    std::vector<const std::vector<double>*> ks(g.d(), &K);
    const std::size_t N = g.size();
    std::vector<double> a(N), b(N), u(N, 1.0), v(N, 1.0), t(N);
    for (std::size_t i = 0; i < N; ++i) {
        a[i] = loga[i] > neg_inf ? std::exp(loga[i]) : 0.0;
        b[i] = logb[i] > neg_inf ? std::exp(logb[i]) : 0.0;
    }
    PairOutcome out;
    for (int it = 0; it < cfg.max_iter; ++it) {
        for (std::size_t i = 0; i < N; ++i) t[i] = a[i] * u[i];
        auto Ku = convolve(g, t, ks);
        for (std::size_t j = 0; j < N; ++j) v[j] = Ku[j] > 0 ? 1.0 / Ku[j] : 0.0;
        for (std::size_t j = 0; j < N; ++j) t[j] = b[j] * v[j];
        auto Kv = convolve(g, t, ks);
        double err = 0;
        for (std::size_t i = 0; i < N; ++i) err += a[i] * std::abs(1.0 - u[i] * Kv[i]);
        ++out.iters;
        out.err = err;
        for (std::size_t i = 0; i < N; ++i) u[i] = Kv[i] > 0 ? 1.0 / Kv[i] : 0.0;
        if (err <= cfg.marginal_tol) {
            out.converged = true;
            break;
        }
    }
    // scalings to potentials; the last row update makes rows exact
    for (std::size_t i = 0; i < N; ++i) t[i] = a[i] * u[i];
    auto Ku = convolve(g, t, ks);
    out.f.resize(N);
    out.g.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        out.f[i] = u[i] > 0 ? eps * std::log(u[i]) : 0.0;
        out.g[i] = Ku[i] > 0 ? -eps * std::log(Ku[i]) : 0.0;
    }
    return out;
}

// alternating updates on the pair (a, b), eps annealed with warm starts
inline PairOutcome solve_pair(const GridSpec& g, const std::vector<double>& loga, const std::vector<double>& logb,
                              const OtConfig& cfg, double eps) {
    PairOutcome out;
    out.f.assign(g.size(), 0.0);
    out.g.assign(g.size(), 0.0);
    for (double e : eps_ladder(g, eps, cfg.eps_scaling)) {
        OtProblem P{g, e, loga, logb, make_axis_kernel(g, e, KernelKind::plain)};
        const bool last = (e == eps);
        const double tol = last ? cfg.marginal_tol : std::max(cfg.marginal_tol, 1e-3);
        const int cap = last ? cfg.max_iter : 100;
        for (int it = 0; it < cap; ++it) {
            out.g = P.c_transform(out.f, loga);
            auto fn = P.c_transform(out.g, logb);
            double err = 0;
            for (std::size_t i = 0; i < fn.size(); ++i)
                if (loga[i] > neg_inf) err += std::exp(loga[i]) * std::abs(1.0 - std::exp((out.f[i] - fn[i]) / e));
            ++out.iters;
            out.err = err;
            if (err <= tol) {
                if (last) out.converged = true;
                break;
            }
            out.f = std::move(fn);
        }
    }
    return out;
}

// self transport by the averaged symmetric iteration f <- (f + T(f))/2
inline double solve_self(const GridSpec& g, const std::vector<double>& loga, const OtConfig& cfg, double eps,
                         bool* converged = nullptr) {
    std::vector<double> f(g.size(), 0.0);
    bool ok = false;
    for (double e : eps_ladder(g, eps, cfg.eps_scaling)) {
        OtProblem P{g, e, loga, loga, make_axis_kernel(g, e, KernelKind::plain)};
        const bool last = (e == eps);
        const double tol = last ? cfg.marginal_tol : std::max(cfg.marginal_tol, 1e-3);
        const int cap = last ? cfg.max_iter : 100;
        for (int it = 0; it < cap; ++it) {
            auto t = P.c_transform(f, loga);
            double err = 0;
            for (std::size_t i = 0; i < f.size(); ++i) {
                if (loga[i] > neg_inf) err += std::exp(loga[i]) * std::abs(1.0 - std::exp((f[i] - t[i]) / e));
                f[i] = 0.5 * (f[i] + t[i]);
            }
            if (err <= tol) {
                ok = last;
                break;
            }
        }
    }
    if (converged) *converged = ok;
    return 2.0 * weighted(f, loga);
}

// sum_ij P_ij |x_i - y_j|^2 of the normalized plan, one squared-offset kernel per axis
inline double plan_cost(const GridSpec& g, const std::vector<double>& loga, const std::vector<double>& logb,
                        const std::vector<double>& f, const std::vector<double>& gp, double eps) {
    std::vector<double> in(g.size());
    for (std::size_t j = 0; j < in.size(); ++j) in[j] = logb[j] + gp[j] / eps;
    auto K0 = make_axis_kernel(g, eps, KernelKind::plain);
    auto K2 = make_axis_kernel(g, eps, KernelKind::squared);
    double total = 0;
    for (int a = 0; a < g.d(); ++a) {
        std::vector<const AxisLogKernel*> ks(g.d(), &K0);
        ks[a] = &K2;
        auto l = log_convolve(g, in, ks);
        for (std::size_t i = 0; i < l.size(); ++i)
            if (loga[i] > neg_inf && l[i] > neg_inf) total += std::exp(loga[i] + f[i] / eps + l[i]);
    }
    return total;
}

}  // namespace detail

inline double default_epsilon(const GridSpec& g, const OtConfig& cfg) {
    return cfg.epsilon > 0 ? cfg.epsilon : g.h() * g.h();
}

// Entropic OT between equal-mass densities, quadratic torus cost, KL penalty against the product of marginals.
inline TransportResult sinkhorn(const DensityView& mu, const DensityView& nu, const OtConfig& cfg) {
    require(mu.grid() == nu.grid(), "sinkhorn: grid mismatch");
    require(mu.mass() > 0 && nu.mass() > 0, "sinkhorn: zero-mass input");
    require(std::abs(mu.mass() - nu.mass()) <= 1e-8 * std::max(mu.mass(), nu.mass()), "sinkhorn: mass mismatch");
    require(cfg.max_iter >= 1, "sinkhorn: max_iter must be >= 1");
    const GridSpec& g = mu.grid();
    const double eps = default_epsilon(g, cfg);
    require(eps > 0, "sinkhorn: epsilon must be positive");
    const double M = mu.mass();
    auto la = detail::log_weights(mu.field(), mu.mass());
    auto lb = detail::log_weights(nu.field(), nu.mass());

    auto pr = cfg.log_domain ? detail::solve_pair(g, la, lb, cfg, eps) : detail::solve_pair_plain(g, la, lb, cfg, eps);
    TransportResult r;
    r.mass = M;
    r.epsilon = eps;
    r.cost = M * (detail::weighted(pr.f, la) + detail::weighted(pr.g, lb));
    r.f = Field(g, pr.f);
    r.g = Field(g, pr.g);
    r.converged = pr.converged;
    r.marginal_err = pr.err;
    r.iterations = pr.iters;
    r.sharp_cost = M * detail::plan_cost(g, la, lb, pr.f, pr.g, eps);
    r.w2_sharp = std::sqrt(std::max(0.0, r.sharp_cost));
    if (cfg.debias) {
        bool c1 = true, c2 = true;
        r.cost_xx = M * detail::solve_self(g, la, cfg, eps, &c1);
        r.cost_yy = (la == lb) ? r.cost_xx : M * detail::solve_self(g, lb, cfg, eps, &c2);
        // identical inputs: the pair problem is the self problem
        if (la == lb) r.cost = r.cost_xx;
        r.converged = r.converged && c1 && c2;
        r.divergence = r.cost - 0.5 * (r.cost_xx + r.cost_yy);
        r.w2 = std::sqrt(std::max(0.0, r.divergence));
    } else {
        r.divergence = r.cost;
        r.w2 = std::sqrt(std::max(0.0, r.cost));
    }
    return r;
}

namespace detail {

// exp(lse_pos - base) - exp(lse_neg - base), elementwise
inline std::vector<double> signed_ratio(const std::vector<double>& lp, const std::vector<double>& ln,
                                        const std::vector<double>& base) {
    std::vector<double> o(lp.size());
    for (std::size_t i = 0; i < o.size(); ++i) {
        double p = lp[i] > neg_inf ? std::exp(lp[i] - base[i]) : 0.0;
        double q = ln[i] > neg_inf ? std::exp(ln[i] - base[i]) : 0.0;
        o[i] = p - q;
    }
    return o;
}

}  // namespace detail

// E_p[y|x] - x per axis, on supp(mu); zero elsewhere
inline std::vector<Field> barycentric_map(const TransportResult& r, const DensityView& mu, const DensityView& nu) {
    require(r.converged, "barycentric_map: transport result did not converge");
    const GridSpec& g = mu.grid();
    const double eps = r.epsilon;
    auto la = detail::log_weights(mu.field(), mu.mass());
    auto lb = detail::log_weights(nu.field(), nu.mass());
    std::vector<double> in(g.size());
    for (std::size_t j = 0; j < in.size(); ++j) in[j] = lb[j] + r.g[j] / eps;
    auto K0 = make_axis_kernel(g, eps, KernelKind::plain);
    // displacement y - x = in - out, so the positive part is the negative part of out - in
    auto Kp = make_axis_kernel(g, eps, KernelKind::neg_out_minus_in);
    auto Kn = make_axis_kernel(g, eps, KernelKind::pos_out_minus_in);
    std::vector<const AxisLogKernel*> ks(g.d(), &K0);
    auto base = log_convolve(g, in, ks);
    std::vector<Field> out;
    for (int a = 0; a < g.d(); ++a) {
        ks.assign(g.d(), &K0);
        ks[a] = &Kp;
        auto lp = log_convolve(g, in, ks);
        ks[a] = &Kn;
        auto ln = log_convolve(g, in, ks);
        auto disp = detail::signed_ratio(lp, ln, base);
        for (std::size_t i = 0; i < disp.size(); ++i)
            if (la[i] == neg_inf) disp[i] = 0.0;
        out.emplace_back(g, std::move(disp));
    }
    return out;
}

// M * sum_ij P_ij <y_j - x_i, xi(y_j)>, with x ~ mu and y ~ nu, without forming P
inline double plan_pairing_integral(const TransportResult& r, const DensityView& mu, const DensityView& nu,
                                    const std::vector<Field>& xi) {
    require(r.converged, "plan_pairing_integral: transport result did not converge");
    const GridSpec& g = mu.grid();
    require(int(xi.size()) == g.d(), "plan_pairing_integral: test field must have d components");
    const double eps = r.epsilon;
    auto la = detail::log_weights(mu.field(), mu.mass());
    auto lb = detail::log_weights(nu.field(), nu.mass());
    std::vector<double> in(g.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = la[i] + r.f[i] / eps;
    auto K0 = make_axis_kernel(g, eps, KernelKind::plain);
    auto Kp = make_axis_kernel(g, eps, KernelKind::pos_out_minus_in);
    auto Kn = make_axis_kernel(g, eps, KernelKind::neg_out_minus_in);
    double total = 0;
    for (int a = 0; a < g.d(); ++a) {
        std::vector<const AxisLogKernel*> ks(g.d(), &K0);
        ks[a] = &Kp;
        auto lp = log_convolve(g, in, ks);
        ks[a] = &Kn;
        auto ln = log_convolve(g, in, ks);
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (lb[j] == neg_inf) continue;
            double w = lb[j] + r.g[j] / eps;
            double p = lp[j] > neg_inf ? std::exp(w + lp[j]) : 0.0;
            double q = ln[j] > neg_inf ? std::exp(w + ln[j]) : 0.0;
            total += (p - q) * xi[a][j];
        }
    }
    return r.mass * total;
}

// dense plan in mass units, only for small grids
inline std::vector<double> materialize_plan(const TransportResult& r, const DensityView& mu, const DensityView& nu) {
    const GridSpec& g = mu.grid();
    require(g.size() <= 4096, "materialize_plan: grid too large");
    auto la = detail::log_weights(mu.field(), mu.mass());
    auto lb = detail::log_weights(nu.field(), nu.mass());
    const std::size_t N = g.size();
    std::vector<double> P(N * N, 0.0);
    std::vector<int> ii(g.d()), jj(g.d());
    for (std::size_t i = 0; i < N; ++i) {
        if (la[i] == neg_inf) continue;
        for (std::size_t j = 0; j < N; ++j) {
            if (lb[j] == neg_inf) continue;
            double c = 0;
            for (int a = 0; a < g.d(); ++a) {
                double dx = g.wrap((g.index_on_axis(i, a) - g.index_on_axis(j, a)) * g.h());
                c += dx * dx;
            }
            P[i * N + j] = r.mass * std::exp(la[i] + lb[j] + (r.f[i] + r.g[j] - c) / r.epsilon);
        }
    }
    return P;
}

}  // namespace chimera
