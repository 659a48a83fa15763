#pragma once
// Oracle checks behind `chimera selftest`.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chimera/critical.hpp"
#include "chimera/energy.hpp"
#include "chimera/lp.hpp"
#include "chimera/scheme.hpp"
#include "chimera/sinkhorn.hpp"
#include "oracles.hpp"

namespace selftest {

using namespace chimera;

struct Row {
    std::string name;
    double value = 0, limit = 0;  // pass iff value <= limit
    bool pass = false;
    double seconds = 0;
};

namespace detail {

inline ModelParams step_params(double tau) {
    ModelParams p;
    p.m = 2;
    p.tau = tau;
    p.eps1 = 0.8;
    p.eps2 = 1.3;
    p.kap1 = 0.7;
    p.kap2 = 1.1;
    p.gam1 = 0.3;
    p.gam2 = 0.2;
    return p;
}

constexpr double inf = std::numeric_limits<double>::infinity();

template <class Fn>
Row timed(const std::string& name, double limit, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    Row r;
    r.name = name;
    r.limit = limit;
    r.value = fn();
    r.pass = std::isfinite(r.value) && r.value <= limit;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace detail

inline std::vector<Row> run(std::uint64_t seed, std::ostream* progress = nullptr) {
    std::mt19937_64 rng(seed);
    std::vector<Row> rows;
    auto add = [&](Row r) {
        if (progress) *progress << "  " << r.name << (r.pass ? " ok" : " FAILED") << "\n";
        rows.push_back(std::move(r));
    };

    add(detail::timed("helmholtz: spectral vs dense", 1e-10, [&] {
        GridSpec g(2, 8, 2.0);
        Field rhs = oracle::random_field(g, rng);
        Field x = helmholtz_solve(1.7, 0.6, rhs);
        return oracle::rel(oracle::vec(x), oracle::dense_helmholtz(g, 1.7, 0.6, rhs));
    }));

    add(detail::timed("laplacian: spectral vs dense", 1e-10, [&] {
        GridSpec g(2, 8, 2.0);
        Field f = oracle::random_field(g, rng);
        Eigen::VectorXd ref = oracle::laplacian_dense(g) * oracle::vec(f);
        return oracle::rel(oracle::vec(laplacian(f)), ref);
    }));

    add(detail::timed("exact LP vs quantile coupling (1D)", 1e-9, [&] {
        GridSpec g(1, 16, 4.0);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        double worst = 0;
        for (int t = 0; t < 5; ++t) {
            Field fa(g), fb(g);
            for (int i = 4; i < 12; ++i) fa[i] = U(rng), fb[i] = U(rng);
            DensityView mu(fa);
            DensityView nu = oracle::rescaled(fb, mu.mass());
            std::vector<double> x, a, b;
            for (int i = 0; i < g.n(); ++i) {
                x.push_back(g.coord(i));
                a.push_back(mu[i] * g.h());
                b.push_back(nu[i] * g.h());
            }
            worst = std::max(worst, std::abs(lp_exact_w2(mu, nu).cost - oracle::quantile_w2sq(x, a, b)));
        }
        return worst;
    }));

    // debiased divergence against the exact LP; the bias is at most eps times the mass
    add(detail::timed("sinkhorn divergence vs exact LP, in units of eps*M", 1.0, [&] {
        GridSpec g(1, 32, 4.0);
        OtConfig oc;
        oc.epsilon = g.h() * g.h() / 4;
        double worst = 0;
        for (int t = 0; t < 5; ++t) {
            DensityView mu(oracle::random_compact(g, rng));
            DensityView nu = oracle::rescaled(oracle::random_compact(g, rng), mu.mass());
            auto r = sinkhorn(mu, nu, oc);
            if (!r.converged) return detail::inf;
            worst = std::max(worst, std::abs(r.divergence - lp_exact_w2(mu, nu).cost) / (oc.epsilon * mu.mass()));
        }
        return worst;
    }));

    add(detail::timed("u-step vs brute-force JKO, gap / |E|", 1e-4, [&] {
        GridSpec g(1, 8, 1.0);
        double worst = 0;
        for (int t = 0; t < 2; ++t) {
            ModelParams p = detail::step_params(0.3 + 0.4 * t);
            Field f = oracle::random_field(g, rng, 0.05, 1.0);
            f *= p.M / f.integral();
            DensityView prev(f, p.M);
            Field zero(g);
            InnerSolveConfig in;
            in.tol_u = 1e-11;
            OtConfig ot;
            ot.marginal_tol = 1e-11;
            auto r = u_step(prev, zero, p, ot, in);
            double ours = eval_E(r.u, zero, p) + lp_exact_w2(r.u, prev).cost / (2 * p.tau);
            double best = oracle::brute_force_jko(g, prev, zero, p);
            worst = std::max(worst, std::abs(ours - best) / std::abs(eval_E(r.u, zero, p)));
        }
        return worst;
    }));

    // L(k-1) - L(k) = D + E(u^(k-1), v^k) - E(u^k, v^k), exact for the two linear steps
    add(detail::timed("dissipation identity over 3 steps", 1e-10, [&] {
        GridSpec g(1, 64, 10.0);
        ModelParams p = detail::step_params(0.05);
        Field f = make_field(g, [](const std::vector<double>& x) {
            double r = std::abs(x[0] - 0.3) / 1.2;
            return r < 1 ? std::pow(std::cos(M_PI * r / 2), 2) : 0.0;
        });
        f *= p.M / f.integral();
        DensityView u(f, p.M);
        Field v0 = make_field(g, [](const std::vector<double>& x) { return 0.3 * std::exp(-x[0] * x[0]); });
        Field w0 = v0 * 0.5;
        State s = initial_state(u, v0, w0, p);
        double Lb = eval_L(u, v0, w0, p).L, worst = 0;
        for (int k = 0; k < 3; ++k) {
            auto r = full_step(s, p, OtConfig{}, InnerSolveConfig{}, Lb);
            const auto& R = r.record;
            double rhs = R.D + eval_E(s.u, r.state.v, p) - eval_E(r.state.u, r.state.v, p);
            worst = std::max(worst, std::abs(R.L_before - R.L_after - rhs) / (1 + std::abs(R.L_before)));
            Lb = R.L_after;
            s = r.state;
        }
        return worst;
    }));

    add(detail::timed("dissipation D >= 0 on random histories (value: -min D)", 0.0, [&] {
        std::uniform_real_distribution<double> U(0.1, 2.0);
        double lowest = detail::inf;
        for (int t = 0; t < 20; ++t) {
            GridSpec g(2, 8, 2.0);
            ModelParams p;
            p.eps1 = U(rng), p.eps2 = U(rng), p.kap1 = U(rng), p.kap2 = U(rng), p.tau = 0.1 * U(rng), p.d = 2;
            p.gam1 = t % 2 ? 0 : U(rng);
            p.gam2 = t % 2 ? 0 : U(rng);
            lowest = std::min(lowest, eval_D(oracle::random_field(g, rng), oracle::random_field(g, rng),
                                             oracle::random_field(g, rng), p));
        }
        return -lowest;
    }));

    // d = 6 compact triple; L0 should scale like lambda^(d-4)
    {
        GridSpec g(6, 12, 2.0);
        ModelParams p;
        p.d = 6;
        p.m = 2.0 - 4.0 / 6;
        p.kap1 = 0.8;
        p.kap2 = 1.25;
        p.eps2 = 0.6;
        Field U = oracle::radial_bump(g, 0.95, 1.0, 4);
        U *= 1.0 / U.integral();
        auto t = critical_triple(U, oracle::radial_bump(g, 0.95, 0.5, 4), 0.1, p);
        double L0 = eval_L0(DensityView(t.U), t.V, t.W, p);
        for (double lam : {1.5, 2.0}) {
            std::ostringstream name;
            name << "scaling lambda=" << lam << ": |L0 ratio / lambda^2 - 1|";
            add(detail::timed(name.str(), 0.05, [&] {
                auto s = scaling_family(t.U, t.V, t.W, lam, p.m);
                if (!s.within(0.01)) return detail::inf;
                Field u = s.U;
                for (double& x : u.values) x = std::max(x, 0.0);
                return std::abs(eval_L0(DensityView(u), s.V, s.W, p) / L0 / (lam * lam) - 1);
            }));
        }
    }
    return rows;
}

inline bool all_pass(const std::vector<Row>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

inline void print_table(std::ostream& os, const std::vector<Row>& rows) {
    std::size_t w = 5;
    for (const auto& r : rows) w = std::max(w, r.name.size());
    os << std::left << std::setw(int(w)) << "check" << "  result  " << std::setw(24) << "value" << std::setw(24)
       << "limit" << "seconds\n";
    for (const auto& r : rows)
        os << std::left << std::setw(int(w)) << r.name << "  " << (r.pass ? "PASS    " : "FAIL    ") << std::setw(24)
           << format_num(r.value) << std::setw(24) << format_num(r.limit) << std::setprecision(3) << r.seconds
           << "\n";
}

}  // namespace selftest
