#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "energy.hpp"
#include "grid.hpp"
#include "ledger.hpp"
#include "logkernel.hpp"
#include "model.hpp"
#include "norms.hpp"
#include "sinkhorn.hpp"
#include "spectral.hpp"

namespace chimera {

struct InnerSolveConfig {
    int max_outer = 20000;
    double tol_u = 1e-8;     // L1 change between sweeps, relative to M
    double tol_obj = 1e-9;   // descent slack, relative to 1 + |objective|
    bool anneal = true;      // warm the scalings on a coarser eps ladder first
    double ref_weight = 0.5; // weight of KL(u/M | uniform) added to the entropic transport cost
};

struct InnerNonConvergence : Error {
    double du = 0, marginal_err = 0;
    int sweeps = 0;
    InnerNonConvergence(double du_, double me, int s)
        : Error("u_step: inner solver did not converge after " + std::to_string(s) + " sweeps (L1 change " +
                format_num(du_) + ", marginal error " + format_num(me) + ")"),
          du(du_), marginal_err(me), sweeps(s) {}
};

struct State {
    DensityView u;
    Field v, w;
    Field v_prev;  // v one step earlier; the extension at k = 0
    int k = 0;
    double time = 0;
};

inline State initial_state(const DensityView& u0, const Field& v0, const Field& w0, const ModelParams& p) {
    return State{u0, v0, w0, v_extension(v0, w0, p), 0, 0.0};
}

// (eps2/tau + gam2 - kap2 Lap) w = (eps2/tau) w_prev + u_prev
inline Field w_step(const Field& w_prev, const Field& u_prev, const ModelParams& p) {
    Field rhs = w_prev * (p.eps2 / p.tau) + u_prev;
    return helmholtz_solve(p.eps2 / p.tau + p.gam2, p.kap2, rhs);
}

inline Field w_step(const State& prev, const ModelParams& p) { return w_step(prev.w, prev.u.field(), p); }

// (eps1/tau + gam1 - kap1 Lap) v = (eps1/tau) v_prev + w_new
inline Field v_step(const Field& prev_v, const Field& w_new, const ModelParams& p) {
    Field rhs = prev_v * (p.eps1 / p.tau) + w_new;
    return helmholtz_solve(p.eps1 / p.tau + p.gam1, p.kap1, rhs);
}

inline double w_objective(const Field& w, const Field& w_prev, const Field& u_prev, const ModelParams& p) {
    Field d = w - w_prev;
    return 0.5 * (p.kap2 * grad_sq(w) + p.gam2 * dot(w, w)) - dot(u_prev, w) + p.eps2 / (2 * p.tau) * dot(d, d);
}

inline double v_objective(const Field& v, const Field& v_prev, const Field& w_new, const ModelParams& p) {
    Field d = v - v_prev;
    return eval_F(v, w_new, p) + p.eps1 / (2 * p.tau) * dot(d, d);
}

inline double kl_to_uniform(const std::vector<double>& logp) {
    const double logN = std::log(double(logp.size()));
    double s = 0;
    for (double l : logp)
        if (l > neg_inf) s += std::exp(l) * (l + logN);
    return s;
}

// E(u, v) + (1/2tau) [OT_eps(u, u_prev) + w M eps KL(u/M | uniform)], OT_eps being the entropic cost against the
// product of the marginals and w = inner.ref_weight. tr must be sinkhorn(u_prev, u) at the step's eps.
// With self = true the value at u = u_prev, whose transport term is the self cost.
inline double u_objective(const DensityView& u, const DensityView& u_prev, const Field& v, const TransportResult& tr,
                          const ModelParams& p, double ref_weight, bool self = false) {
    const double Me = tr.mass * tr.epsilon;
    if (self) {
        auto lq = detail::log_weights(u_prev.field(), u_prev.mass());
        return eval_E(u_prev, v, p) + (tr.cost_xx + ref_weight * Me * kl_to_uniform(lq)) / (2 * p.tau);
    }
    auto lp = detail::log_weights(u.field(), u.mass());
    return eval_E(u, v, p) + (tr.cost + ref_weight * Me * kl_to_uniform(lp)) / (2 * p.tau);
}

namespace detail {

// root of s + sig*(m e^{(m-1)s}/(m-1) - v) = ell; the left side is convex and increasing in s
inline double prox_root(double ell, double v, double sig, double m, double s0) {
    const double hi = ell + sig * v;
    double s = std::isfinite(s0) ? std::min(s0, hi) : hi;
    for (int it = 0; it < 200; ++it) {
        double e = std::exp((m - 1) * s);
        double f = s + sig * (m * e / (m - 1) - v) - ell;
        double fp = 1 + sig * m * e;
        double step = f / fp;
        s -= step;
        if (s > hi) s = hi;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(s))) break;
    }
    return s;
}

}  // namespace detail

struct UStepResult {
    DensityView u;
    TransportResult tr;
    int sweeps = 0;
    double objective = 0, objective_prev = 0;
};

// Entropic JKO step for E(., v) from u_prev. The plan is P = diag(A) K diag(B); B matches the columns to u_prev,
// A comes from a scalar root per cell. With weight w on KL(p | uniform) the row condition reads
//   w log p_i + (2 tau / eps) (E'(u_i) - v_i) = log (K B)_i.
// w = 1/2 cancels the first-order blur of a stationary state; w = 1 is the Lebesgue-reference problem.
inline UStepResult u_step(const DensityView& prev_u, const Field& v_new, const ModelParams& p, const OtConfig& ot,
                          const InnerSolveConfig& inner) {
    require(std::abs(prev_u.mass() - p.M) <= 1e-10 * p.M, "u_step: previous density does not carry mass M");
    require(p.m > 1, "u_step: m must exceed 1");
    require(inner.ref_weight > 0, "u_step: ref_weight must be positive");
    const GridSpec& g = prev_u.grid();
    const std::size_t N = g.size();
    const double M = prev_u.mass();
    const double eps = default_epsilon(g, ot);
    const double wr = inner.ref_weight;
    const double log_scale = std::log(M / g.cell_volume());  // log u = log p + log_scale
    auto logq = detail::log_weights(prev_u.field(), M);

    std::vector<double> ladder{eps};
    if (inner.anneal) ladder = detail::eps_ladder(g, eps, ot.eps_scaling);

    std::vector<double> logB(N, 0.0), logA(N, 0.0), s(N);
    for (std::size_t i = 0; i < N; ++i) s[i] = std::log(std::max(prev_u[i], 1e-300));
    std::vector<double> u_cur(N), u_old(N);
    for (std::size_t i = 0; i < N; ++i) u_cur[i] = std::max(prev_u[i], 0.0);
    for (std::size_t j = 0; j < N; ++j)
        if (logq[j] == neg_inf) logB[j] = neg_inf;

    int sweeps = 0;
    double du = 0, err = 0;
    bool done = false;
    for (double e : ladder) {
        const bool last = (e == eps);
        const double sig = 2 * p.tau / (e * wr);
        auto K = make_axis_kernel(g, e, KernelKind::plain);
        std::vector<const AxisLogKernel*> ks(g.d(), &K);
        const double tol_u = last ? inner.tol_u : std::max(inner.tol_u, 1e-4);
        const double tol_m = last ? ot.marginal_tol : std::max(ot.marginal_tol, 1e-4);
        const int cap = last ? inner.max_outer : 200;
        auto KB = log_convolve(g, logB, ks);
        for (int it = 0; it < cap; ++it) {
            ++sweeps;
            // rows: proximal condition per cell
            u_old = u_cur;
            for (std::size_t i = 0; i < N; ++i) {
                if (KB[i] == neg_inf) {
                    s[i] = neg_inf;
                    logA[i] = neg_inf;
                    u_cur[i] = 0;
                    continue;
                }
                s[i] = detail::prox_root(log_scale + KB[i] / wr, v_new[i], sig, p.m, s[i]);
                logA[i] = s[i] - log_scale - KB[i];
                u_cur[i] = std::exp(s[i]);
            }
            // columns: match the previous density
            auto KA = log_convolve(g, logA, ks);
            for (std::size_t j = 0; j < N; ++j) logB[j] = logq[j] > neg_inf ? logq[j] - KA[j] : neg_inf;
            // row marginal implied by the new columns
            KB = log_convolve(g, logB, ks);
            err = 0;
            du = 0;
            const double hd_over_M = g.cell_volume() / M;
            for (std::size_t i = 0; i < N; ++i) {
                double implied = logA[i] > neg_inf && KB[i] > neg_inf ? std::exp(logA[i] + KB[i]) : 0.0;
                err += std::abs(u_cur[i] * hd_over_M - implied);
                du += std::abs(u_cur[i] - u_old[i]);
            }
            du *= hd_over_M;
            if (du <= tol_u && err <= tol_m) {
                if (last) done = true;
                break;
            }
        }
        if (!last) {
            // carry the scalings to the next eps as potentials
            const double next = e * ot.eps_scaling < eps ? eps : e * ot.eps_scaling;
            for (std::size_t j = 0; j < N; ++j)
                if (logB[j] > neg_inf) logB[j] = logq[j] + (logB[j] - logq[j]) * e / next;
        }
    }
    if (!done) throw InnerNonConvergence(du, err, sweeps);

    // final column projection: the row sums carry exactly the mass of u_prev
    auto K = make_axis_kernel(g, eps, KernelKind::plain);
    std::vector<const AxisLogKernel*> ks(g.d(), &K);
    auto KB = log_convolve(g, logB, ks);
    Field un(g);
    for (std::size_t i = 0; i < N; ++i)
        un[i] = (logA[i] > neg_inf && KB[i] > neg_inf) ? std::exp(logA[i] + KB[i] + log_scale) : 0.0;
    un *= M / un.integral();
    DensityView u(un, M);

    OtConfig oc = ot;
    oc.epsilon = eps;
    UStepResult r{u, sinkhorn(prev_u, u, oc), sweeps, 0, 0};
    r.objective = u_objective(u, prev_u, v_new, r.tr, p, wr);
    r.objective_prev = u_objective(u, prev_u, v_new, r.tr, p, wr, true);
    return r;
}

// (int |grad u^m - u grad v|^2 / u)^(1/2) over cells with u > u_floor, evaluated as
// (int u |grad(m u^(m-1)/(m-1) - v)|^2)^(1/2) so that spectral ringing near the support edge is not divided by u
inline double slope_lhs(const DensityView& u, const Field& v, const ModelParams& p) {
    const GridSpec& g = u.grid();
    const double floor = 1e-12 * p.M / g.volume();
    Field uc = u.clamped();
    Field q(g);
    for (std::size_t i = 0; i < g.size(); ++i) q[i] = p.m * std::pow(uc[i], p.m - 1) / (p.m - 1) - v[i];
    auto gq = gradient(q);
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (uc[i] <= floor) continue;
        double t = 0;
        for (int a = 0; a < g.d(); ++a) t += gq[a][i] * gq[a][i];
        s += uc[i] * t;
    }
    return std::sqrt(s * g.cell_volume());
}

inline SlopeDiagnostic slope_check(const DensityView& u, const Field& v, const TransportResult& tr,
                                   const ModelParams& p) {
    SlopeDiagnostic sd;
    sd.lhs = slope_lhs(u, v, p);
    sd.rhs = tr.w2 / p.tau;
    sd.ratio = sd.rhs > 0 ? sd.lhs / sd.rhs : 0.0;
    return sd;
}

// sin and cos of the first `modes` wavenumbers along every axis
inline std::vector<std::vector<Field>> default_test_basis(const GridSpec& g, int modes = 2) {
    std::vector<std::vector<Field>> out;
    const double two_pi = 2 * std::numbers::pi;
    for (int a = 0; a < g.d(); ++a)
        for (int k = 1; k <= modes; ++k)
            for (int c = 0; c < 2; ++c) {
                std::vector<Field> xi(g.d(), Field(g));
                xi[a] = make_field(g, [&](const std::vector<double>& x) {
                    double t = two_pi * k * (x[a] - g.origin()) / g.L();
                    return c ? std::cos(t) : std::sin(t);
                });
                out.push_back(std::move(xi));
            }
    return out;
}

// |plan term + tau int <grad u^m - u grad v, xi>| / (tau |xi|_inf M), per test field
inline std::vector<double> el_residual_u(const DensityView& u_prev, const State& st, const TransportResult& tr,
                                         const ModelParams& p, const std::vector<std::vector<Field>>& tests) {
    Field uc = st.u.clamped();
    Field um = uc;
    for (double& x : um.values) x = std::pow(x, p.m);
    auto gum = gradient(um);
    auto gv = gradient(st.v);
    std::vector<double> out;
    for (const auto& xi : tests) {
        double sup = 0;
        for (const auto& c : xi) sup = std::max(sup, sup_norm(c));
        if (sup == 0) {
            out.push_back(0.0);
            continue;
        }
        double plan = plan_pairing_integral(tr, u_prev, st.u, xi);
        double flux = 0;
        for (int a = 0; a < u_prev.grid().d(); ++a) {
            Field f = gum[a];
            for (std::size_t i = 0; i < f.size(); ++i) f[i] -= uc[i] * gv[a][i];
            flux += dot(f, xi[a]);
        }
        out.push_back(std::abs(plan + p.tau * flux) / (p.tau * sup * p.M));
    }
    return out;
}

struct DeGiorgiPoint {
    double sigma = 0;
    DensityView U;
    double w2_from_prev = 0;
    double slope_lhs = 0;
};

// U_sigma: the u-step re-solved with step sigma, same v
inline std::vector<DeGiorgiPoint> de_giorgi_interpolate(const State& prev, const Field& v_new,
                                                        const std::vector<double>& sigmas, const ModelParams& p,
                                                        const OtConfig& ot, const InnerSolveConfig& inner) {
    std::vector<DeGiorgiPoint> out;
    double last = 0;
    for (double s : sigmas) {
        require(s > 0 && s <= p.tau * (1 + 1e-14), "de_giorgi_interpolate: sigma outside (0, tau]");
        require(s >= last, "de_giorgi_interpolate: sigmas must be ascending");
        last = s;
        ModelParams ps = p;
        ps.tau = s;
        auto r = u_step(prev.u, v_new, ps, ot, inner);
        out.push_back(DeGiorgiPoint{s, r.u, r.tr.w2, slope_lhs(r.u, v_new, p)});
    }
    return out;
}

struct StepOptions {
    std::vector<double> de_giorgi_fractions;  // sigma / tau, ascending, in (0, 1]
};

struct StepResult {
    State state;
    StepRecord record;
    TransportResult tr;
    double w_obj = 0, w_obj_prev = 0;
    double v_obj = 0, v_obj_prev = 0;
    double u_obj = 0, u_obj_prev = 0;
    int sweeps = 0;
};

// w, then v, then u
inline StepResult full_step(const State& prev, const ModelParams& p, const OtConfig& ot, const InnerSolveConfig& inner,
                            double L_before, const StepOptions& opt = {}) {
    StepResult r;
    Field w = w_step(prev, p);
    Field v = v_step(prev.v, w, p);
    auto us = u_step(prev.u, v, p, ot, inner);
    r.w_obj = w_objective(w, prev.w, prev.u.field(), p);
    r.w_obj_prev = w_objective(prev.w, prev.w, prev.u.field(), p);
    r.v_obj = v_objective(v, prev.v, w, p);
    r.v_obj_prev = v_objective(prev.v, prev.v, w, p);
    r.u_obj = us.objective;
    r.u_obj_prev = us.objective_prev;
    r.sweeps = us.sweeps;
    r.tr = us.tr;
    r.state = State{us.u, v, w, prev.v, prev.k + 1, (prev.k + 1) * p.tau};

    StepRecord& rec = r.record;
    rec.k = r.state.k;
    rec.time = r.state.time;
    rec.w2_sq_over_2tau = us.tr.w2 * us.tr.w2 / (2 * p.tau);
    rec.D = eval_D(v, prev.v, prev.v_prev, p);
    rec.L_before = L_before;
    rec.L_after = eval_L(us.u, v, w, p).L;
    rec.slope = slope_check(us.u, v, us.tr, p);
    rec.dH1_sq = dH1_sq(v, prev.v, p);
    rec.norms = norm_bundle(us.u, v, w, p);
    Field res = coupling_residual(v, w, p);
    rec.resid_sq = dot(res, res);
    rec.resid_grad_sq = grad_sq(res);
    if (!opt.de_giorgi_fractions.empty()) {
        std::vector<double> sig;
        for (double f : opt.de_giorgi_fractions) sig.push_back(f * p.tau);
        for (auto& pt : de_giorgi_interpolate(prev, v, sig, p, ot, inner))
            rec.de_giorgi.push_back(DeGiorgiSample{pt.sigma, pt.w2_from_prev, pt.slope_lhs});
    }
    return r;
}

struct InitialGate {
    double L_raw = 0, L_mollified = 0;
    bool pass = false;
    double tau_star = 0;  // largest tested tau that passes
};

inline InitialGate initial_gate(const DensityView& u0, const Field& v0, const Field& w0, const ModelParams& p,
                                std::vector<double> trial_taus = {}) {
    InitialGate g;
    g.L_raw = eval_L(u0, v0, w0, p).L;
    g.L_mollified = eval_L(mollify_initial(u0, p.tau), v0, w0, p).L;
    g.pass = g.L_mollified <= g.L_raw + 1;
    trial_taus.push_back(p.tau);
    for (double t : trial_taus)
        if (t > g.tau_star && eval_L(mollify_initial(u0, t), v0, w0, p).L <= g.L_raw + 1) g.tau_star = t;
    return g;
}

}  // namespace chimera
