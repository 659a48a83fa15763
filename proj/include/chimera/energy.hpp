#pragma once

#include <cmath>
#include <vector>

#include "grid.hpp"
#include "model.hpp"
#include "norms.hpp"
#include "spectral.hpp"

namespace chimera {

// -<f, Lap f>: the same quadratic form the Helmholtz solves use, Nyquist mode included
inline double grad_sq(const Field& f) { return -dot(f, laplacian(f)); }

inline double internal_energy(const Field& u, double m) {
    double s = 0;
    for (double x : u.values) s += std::pow(std::max(x, 0.0), m);
    return s * u.grid.cell_volume() / (m - 1);
}

inline double eval_E(const DensityView& u, const Field& v, const ModelParams& p) {
    require(p.m > 1, "eval_E: m must exceed 1");
    return internal_energy(u.field(), p.m) - dot(u.field(), v);
}

inline double eval_F(const Field& v, const Field& w, const ModelParams& p) {
    return 0.5 * (p.kap1 * grad_sq(v) + p.gam1 * dot(v, v)) - dot(v, w);
}

inline double eval_G(const Field& w, const DensityView& u, const ModelParams& p) {
    return 0.5 * (p.kap2 * grad_sq(w) + p.gam2 * dot(w, w)) - dot(u.field(), w);
}

// kap1 Lap v - gam1 v + w
inline Field coupling_residual(const Field& v, const Field& w, const ModelParams& p) {
    Field r = laplacian(v);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = p.kap1 * r[i] - p.gam1 * v[i] + w[i];
    return r;
}

struct EnergyReport {
    double E = 0, F = 0, G = 0, L = 0;
    double internal = 0;      // int u^m/(m-1)
    double potential = 0;     // -int uv
    double biharmonic = 0;    // kap1 kap2/2 |Lap v|^2
    double gradient = 0;      // (gam1 kap2 + gam2 kap1)/2 |grad v|^2
    double l2 = 0;            // gam1 gam2/2 |v|^2
    double residual_sq = 0;   // eps2/(2 eps1) |kap1 Lap v - gam1 v + w|^2

    double sum_of_terms() const { return internal + potential + biharmonic + gradient + l2 + residual_sq; }
};

inline EnergyReport eval_L(const DensityView& u, const Field& v, const Field& w, const ModelParams& p) {
    require(p.m > 1 && p.eps1 > 0, "eval_L: needs m > 1 and eps1 > 0");
    EnergyReport r;
    Field lap = laplacian(v);
    r.internal = internal_energy(u.field(), p.m);
    r.potential = -dot(u.field(), v);
    r.biharmonic = 0.5 * p.kap1 * p.kap2 * dot(lap, lap);
    double gv = grad_sq(v);
    r.gradient = 0.5 * (p.gam1 * p.kap2 + p.gam2 * p.kap1) * gv;
    r.l2 = 0.5 * p.gam1 * p.gam2 * dot(v, v);
    Field res = coupling_residual(v, w, p);
    r.residual_sq = p.eps2 / (2 * p.eps1) * dot(res, res);
    r.L = r.sum_of_terms();
    r.E = r.internal + r.potential;
    r.F = 0.5 * (p.kap1 * gv + p.gam1 * dot(v, v)) - dot(v, w);
    r.G = eval_G(w, u, p);
    return r;
}

inline Field discrete_dt(const Field& now, const Field& prev, double tau) {
    now.check_same(prev);
    Field r = now - prev;
    return r *= 1.0 / tau;
}

inline Field discrete_dt_bar(const Field& now, const Field& prev, double tau) {
    now.check_same(prev);
    Field r = now + prev;
    return r *= 1.0 / tau;
}

// Dissipation of one step from v^k, v^(k-1), v^(k-2); at k = 1 the third argument is the extension.
inline double eval_D(const Field& v_now, const Field& v_prev, const Field& v_prev2, const ModelParams& p) {
    const double t = p.tau;
    Field dv = discrete_dt(v_now, v_prev, t);
    Field dv_prev = discrete_dt(v_prev, v_prev2, t);
    Field d2v = discrete_dt(dv, dv_prev, t);
    Field lap_dv = laplacian(dv);
    const double t2 = 0.5 * t * t;
    double D = t2 * p.eps1 * p.eps2 * dot(d2v, d2v);
    D += t2 * p.kap1 * p.kap2 * dot(lap_dv, lap_dv);
    D += t2 * (2 * (p.eps1 * p.kap2 + p.eps2 * p.kap1) / t + (p.gam1 * p.kap2 + p.gam2 * p.kap1)) * grad_sq(dv);
    D += t2 * (2 * (p.gam1 * p.eps2 + p.gam2 * p.eps1) / t + p.gam1 * p.gam2) * dot(dv, dv);
    return D;
}

// v^(-1) chosen so the v-equation holds at k = 0
inline Field v_extension(const Field& v0, const Field& w0, const ModelParams& p) {
    Field r = coupling_residual(v0, w0, p);
    Field out = v0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= p.tau * r[i] / p.eps1;
    return out;
}

// squared H1-type distance between successive v, weighted as in the continuity estimate
inline double dH1_sq(const Field& v_now, const Field& v_prev, const ModelParams& p) {
    Field dv = v_now - v_prev;
    return (p.eps1 * p.kap2 + p.eps2 * p.kap1) * grad_sq(dv) +
           (p.gam1 * p.eps2 + p.gam2 * p.eps1 + p.eps1 * p.eps2) * dot(dv, dv);
}

struct NormBundle {
    double u_L1 = 0, u_Lm = 0, u_L2 = 0, grad_um = 0;
    double v_W22 = 0, v_W32 = 0, w_H1 = 0, w_W22 = 0;
    double second_moment = 0;
};

inline NormBundle norm_bundle(const DensityView& u, const Field& v, const Field& w, const ModelParams& p) {
    NormBundle b;
    Field uc = u.clamped();
    b.u_L1 = lp_norm(uc, 1);
    b.u_Lm = lp_norm(uc, p.m);
    b.u_L2 = lp_norm(uc, 2);
    Field um = uc;
    for (double& x : um.values) x = std::pow(x, p.m);
    auto G = gradient(um);
    Field mag(u.grid());
    for (std::size_t i = 0; i < mag.size(); ++i) {
        double s = 0;
        for (auto& c : G) s += c[i] * c[i];
        mag[i] = std::sqrt(s);
    }
    // |grad u^m| in L^(d/(d-1)); for d = 1 the exponent is infinite
    const int d = u.grid().d();
    b.grad_um = d == 1 ? sup_norm(mag) : lp_norm(mag, double(d) / (d - 1));
    auto sv = sobolev_norms(v), sw = sobolev_norms(w);
    b.v_W22 = sv.W22;
    b.v_W32 = sv.W32;
    b.w_H1 = sw.H1;
    b.w_W22 = sw.W22;
    b.second_moment = second_moment(u);
    return b;
}

}  // namespace chimera
