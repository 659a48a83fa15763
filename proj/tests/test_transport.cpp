#include <gtest/gtest.h>

#include <random>

#include "chimera/lp.hpp"
#include "chimera/norms.hpp"
#include "chimera/sinkhorn.hpp"
#include "oracles.hpp"

using namespace chimera;

namespace {

OtConfig cfg_eps(double eps, double tol = 1e-9) {
    OtConfig c;
    c.epsilon = eps;
    c.marginal_tol = tol;
    return c;
}

struct Line {
    std::vector<double> x, a, b;
};

Line line_masses(const DensityView& mu, const DensityView& nu) {
    const auto& g = mu.grid();
    Line l;
    for (int i = 0; i < g.n(); ++i) {
        l.x.push_back(g.coord(i));
        l.a.push_back(mu[i] * g.h());
        l.b.push_back(nu[i] * g.h());
    }
    return l;
}

}  // namespace

TEST(Sinkhorn, IdenticalInputsGiveZero) {
    GridSpec g(2, 16, 4.0);
    std::mt19937_64 rng(1);
    DensityView mu(oracle::random_bumps(g, rng, 3, 0.01));
    auto r = sinkhorn(mu, mu, cfg_eps(g.h() * g.h()));
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.w2, 1e-8);
}

TEST(Sinkhorn, TwoSpikes) {
    GridSpec g(1, 64, 8.0);
    Field a(g), b(g);
    a[20] = 3.0;
    b[41] = 3.0;
    DensityView mu(a), nu(b);
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h()));
    double ref = std::sqrt(mu.mass()) * 21 * g.h();
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.w2, ref, 0.05 * ref);
}

TEST(Sinkhorn, QuantileOracle1D) {
    GridSpec g(1, 64, 8.0);
    std::mt19937_64 rng(2);
    const double eps = g.h() * g.h() / 4;
    double fitted = 0;
    for (int t = 0; t < 5; ++t) {
        DensityView mu(oracle::random_compact(g, rng));
        DensityView nu = oracle::rescaled(oracle::random_compact(g, rng), mu.mass());
        auto l = line_masses(mu, nu);
        double w2sq = oracle::quantile_w2sq(l.x, l.a, l.b);
        auto r = sinkhorn(mu, nu, cfg_eps(eps));
        ASSERT_TRUE(r.converged);
        // transport cost of the entropic plan
        EXPECT_NEAR(r.w2_sharp, std::sqrt(w2sq), 1e-3 * std::sqrt(w2sq));
        EXPECT_GE(r.sharp_cost, w2sq * (1 - 1e-9));
        // the regularized cost sits within C eps log(cells) of the optimum
        fitted = std::max(fitted, std::abs(r.cost - w2sq) / (eps * mu.mass() * std::log(double(g.size()))));
        // divergence: first-order bias in eps, bounded by eps times the mass
        EXPECT_LE(std::abs(r.divergence - w2sq), eps * mu.mass());
    }
    RecordProperty("fitted_C", std::to_string(fitted));
    EXPECT_LT(fitted, 1.0);
}

TEST(Sinkhorn, SymmetryAndMassScaling) {
    GridSpec g(2, 16, 4.0);
    std::mt19937_64 rng(3);
    DensityView mu(oracle::random_bumps(g, rng, 2, 0.01));
    DensityView nu = oracle::rescaled(oracle::random_bumps(g, rng, 2, 0.01), mu.mass());
    auto c = cfg_eps(g.h() * g.h(), 1e-11);
    auto r1 = sinkhorn(mu, nu, c), r2 = sinkhorn(nu, mu, c);
    EXPECT_LE(std::abs(r1.w2 - r2.w2), 1e-8 * (1 + r1.w2));
    DensityView mu3(3.0 * mu.field()), nu3(3.0 * nu.field());
    auto r3 = sinkhorn(mu3, nu3, c);
    EXPECT_NEAR(r3.w2, std::sqrt(3.0) * r1.w2, 1e-8 * r3.w2);
}

TEST(Sinkhorn, TriangleInequality) {
    GridSpec g(1, 64, 8.0);
    std::mt19937_64 rng(4);
    auto c = cfg_eps(g.h() * g.h());
    for (int t = 0; t < 6; ++t) {
        DensityView a(oracle::random_bumps(g, rng, 2, 0.001));
        DensityView b = oracle::rescaled(oracle::random_bumps(g, rng, 2, 0.001), a.mass());
        DensityView d = oracle::rescaled(oracle::random_bumps(g, rng, 2, 0.001), a.mass());
        double ab = sinkhorn(a, b, c).w2, bd = sinkhorn(b, d, c).w2, ad = sinkhorn(a, d, c).w2;
        EXPECT_LE(ad, ab + bd + 1e-6);
        EXPECT_LE(ab, ad + bd + 1e-6);
        EXPECT_LE(bd, ab + ad + 1e-6);
    }
}

TEST(Sinkhorn, CostMonotoneInEpsilon) {
    GridSpec g(1, 64, 8.0);
    std::mt19937_64 rng(5);
    DensityView mu(oracle::random_compact(g, rng));
    DensityView nu = oracle::rescaled(oracle::random_compact(g, rng), mu.mass());
    double prev = 1e300;
    for (double eps : {4 * g.h() * g.h(), g.h() * g.h(), g.h() * g.h() / 4}) {
        auto r = sinkhorn(mu, nu, cfg_eps(eps));
        EXPECT_LE(r.cost, prev);
        prev = r.cost;
    }
}

TEST(Sinkhorn, PlainScalingAgreesWithLogDomain) {
    GridSpec g(2, 16, 4.0);
    std::mt19937_64 rng(6);
    DensityView mu(oracle::random_bumps(g, rng, 2, 0.05));
    DensityView nu = oracle::rescaled(oracle::random_bumps(g, rng, 2, 0.05), mu.mass());
    auto c = cfg_eps(4 * g.h() * g.h(), 1e-11);
    auto r1 = sinkhorn(mu, nu, c);
    c.log_domain = false;
    auto r2 = sinkhorn(mu, nu, c);
    EXPECT_NEAR(r1.cost, r2.cost, 1e-8 * r1.cost);
}

TEST(Sinkhorn, RejectsMassMismatch) {
    GridSpec g(1, 16, 1.0);
    EXPECT_THROW(sinkhorn(uniform_density(g, 1.0), uniform_density(g, 1.1), OtConfig{}), Error);
}

TEST(ExactLP, IdentityIsFree) {
    GridSpec g(2, 8, 2.0);
    std::mt19937_64 rng(7);
    DensityView mu(oracle::random_field(g, rng, 0.1, 1.0));
    auto p = lp_exact_w2(mu, mu);
    EXPECT_NEAR(p.cost, 0.0, 1e-12);
    for (auto& e : p.support)
        if (e.mass > 1e-12) EXPECT_EQ(e.i, e.j);
}

TEST(ExactLP, TwoCellsEnumerated) {
    GridSpec g(1, 2, 2.0);
    const double a = 0.7, b = 0.3;
    Field fa(g), fb(g);
    fa[0] = a, fa[1] = b, fb[0] = b, fb[1] = a;
    DensityView mu(fa), nu(fb);
    // feasible plans: t on the diagonal cell 0, cost (a - t) for the cross flow
    double best = 1e300;
    for (int k = 0; k <= 1000; ++k) {
        double t = b * k / 1000.0;
        double cross01 = (a - t) * g.h(), cross10 = (a - t - (a - b)) * g.h();
        if (cross10 < -1e-15) continue;
        best = std::min(best, (cross01 + cross10) * 1.0);
    }
    auto p = lp_exact_w2(mu, nu);
    EXPECT_NEAR(p.cost, (a - b) * g.h(), 1e-12);
    EXPECT_NEAR(p.cost, best, 1e-12);
}

TEST(ExactLP, QuantileOracle1D) {
    GridSpec g(1, 16, 4.0);
    std::mt19937_64 rng(8);
    for (int t = 0; t < 5; ++t) {
        // support restricted to the central half so the torus and line metrics agree
        Field fa(g), fb(g);
        std::uniform_real_distribution<double> U(0.0, 1.0);
        for (int i = 4; i < 12; ++i) fa[i] = U(rng), fb[i] = U(rng);
        DensityView mu(fa);
        DensityView nu = oracle::rescaled(fb, mu.mass());
        auto l = line_masses(mu, nu);
        auto p = lp_exact_w2(mu, nu);
        EXPECT_NEAR(p.cost, oracle::quantile_w2sq(l.x, l.a, l.b), 1e-9);
    }
}

TEST(ExactLP, MarginalsAndDualCertificate2D) {
    GridSpec g(2, 12, 3.0);
    std::mt19937_64 rng(9);
    DensityView mu(oracle::random_field(g, rng, 0.0, 1.0));
    DensityView nu = oracle::rescaled(oracle::random_field(g, rng, 0.0, 1.0), mu.mass());
    auto p = lp_exact_w2(mu, nu);
    std::vector<double> ra(g.size(), 0), rb(g.size(), 0);
    for (auto& e : p.support) {
        EXPECT_GE(e.mass, 0.0);
        ra[e.i] += e.mass;
        rb[e.j] += e.mass;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(ra[i], mu[i] * g.cell_volume(), 1e-9);
        EXPECT_NEAR(rb[i], nu[i] * g.cell_volume(), 1e-9);
    }
    // a small eps entropic cost is an upper bound that approaches the LP value
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h() / 16, 1e-8));
    EXPECT_GE(r.sharp_cost, p.cost - 1e-9);
    EXPECT_NEAR(r.sharp_cost, p.cost, 1e-3 * p.cost);
}

TEST(ExactLP, RejectsLargeInstances) {
    GridSpec g(2, 65, 1.0);
    auto u = uniform_density(g, 1.0);
    EXPECT_THROW(lp_exact_w2(u, u), Error);
}

TEST(Barycentric, IdentityIsSmall) {
    GridSpec g(1, 64, 8.0);
    std::mt19937_64 rng(10);
    DensityView mu(oracle::random_bumps(g, rng, 2, 0.01));
    const double eps = g.h() * g.h();
    auto r = sinkhorn(mu, mu, cfg_eps(eps));
    auto T = barycentric_map(r, mu, mu);
    EXPECT_LE(sup_norm(T[0]), 4 * eps / g.h());
}

TEST(Barycentric, Translation) {
    GridSpec g(2, 64, 8.0);
    const double s = 1.0, sig = 0.6;
    auto bump = [&](double cx) {
        return make_field(g, [&](const std::vector<double>& x) {
            return std::exp(-((x[0] - cx) * (x[0] - cx) + x[1] * x[1]) / (2 * sig * sig));
        });
    };
    DensityView mu(bump(-0.5)), nu(bump(-0.5 + s));
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h(), 1e-7));
    auto T = barycentric_map(r, mu, nu);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (mu[i] > 0.05 * mu.field().max()) {
            EXPECT_NEAR(T[0][i], s, 0.05 * s);
            EXPECT_NEAR(T[1][i], 0.0, 0.05 * s);
        }
}

TEST(Barycentric, QuantileMap1D) {
    GridSpec g(1, 32, 4.0);
    std::mt19937_64 rng(11);
    Field fa(g), fb(g);
    std::uniform_real_distribution<double> U(0.2, 1.0);
    for (int i = 8; i < 24; ++i) fa[i] = U(rng), fb[i] = U(rng);
    DensityView mu(fa);
    DensityView nu = oracle::rescaled(fb, mu.mass());
    auto l = line_masses(mu, nu);
    std::vector<double> ref(g.n(), 0.0);
    for (auto& p : oracle::quantile_plan(l.a, l.b)) ref[p.i] += p.m * (l.x[p.j] - l.x[p.i]);
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h() / 16, 1e-10));
    auto T = barycentric_map(r, mu, nu);
    double num = 0, den = 0;
    for (int i = 0; i < g.n(); ++i)
        if (l.a[i] > 0) {
            double d = ref[i] / l.a[i];
            num += l.a[i] * (T[0][i] - d) * (T[0][i] - d);
            den += l.a[i] * d * d;
        }
    EXPECT_LE(std::sqrt(num / den), 0.02);
}

TEST(Pairing, ZeroFieldAndIdentity) {
    GridSpec g(1, 64, 8.0);
    std::mt19937_64 rng(12);
    DensityView mu(oracle::random_bumps(g, rng, 2, 0.01));
    const double eps = g.h() * g.h();
    auto r = sinkhorn(mu, mu, cfg_eps(eps));
    EXPECT_EQ(plan_pairing_integral(r, mu, mu, {Field(g)}), 0.0);
    Field xi = make_field(g, [](const std::vector<double>& x) { return std::sin(x[0]); });
    EXPECT_LE(std::abs(plan_pairing_integral(r, mu, mu, {xi})), eps * sup_norm(xi) * mu.mass());
}

TEST(Pairing, MatchesMaterializedPlan) {
    GridSpec g(2, 8, 2.0);
    std::mt19937_64 rng(13);
    DensityView mu(oracle::random_field(g, rng, 0.1, 1.0));
    DensityView nu = oracle::rescaled(oracle::random_field(g, rng, 0.1, 1.0), mu.mass());
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h(), 1e-12));
    std::vector<Field> xi{oracle::random_field(g, rng), oracle::random_field(g, rng)};
    auto P = materialize_plan(r, mu, nu);
    const std::size_t N = g.size();
    double ref = 0;
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j)
            for (int a = 0; a < 2; ++a)
                ref += P[i * N + j] * g.wrap((g.index_on_axis(j, a) - g.index_on_axis(i, a)) * g.h()) * xi[a][j];
    EXPECT_NEAR(plan_pairing_integral(r, mu, nu, xi), ref, 1e-10 * std::abs(ref));
}

TEST(Pairing, MatchesExactPlanAtSmallEpsilon) {
    GridSpec g(1, 16, 4.0);
    std::mt19937_64 rng(14);
    Field fa(g), fb(g);
    std::uniform_real_distribution<double> U(0.2, 1.0);
    for (int i = 4; i < 12; ++i) fa[i] = U(rng), fb[i] = U(rng);
    DensityView mu(fa);
    DensityView nu = oracle::rescaled(fb, mu.mass());
    Field xi = oracle::random_field(g, rng);
    auto p = lp_exact_w2(mu, nu);
    double ref = 0;
    for (auto& e : p.support) ref += e.mass * g.wrap(double(int(e.j) - int(e.i)) * g.h()) * xi[e.j];
    auto r = sinkhorn(mu, nu, cfg_eps(g.h() * g.h() / 64, 1e-12));
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(plan_pairing_integral(r, mu, nu, {xi}), ref, 1e-6 * std::abs(ref));
}
