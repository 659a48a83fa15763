#include <gtest/gtest.h>

#include <cstdio>
#include <random>

#include "chimera/norms.hpp"
#include "chimera/snapshot.hpp"
#include "chimera/spectral.hpp"
#include "oracles.hpp"

using namespace chimera;

TEST(GridSpec, DerivedSpacingAndRejects) {
    GridSpec g(2, 32, 3.0);
    EXPECT_EQ(g.h() * g.n(), g.L());
    EXPECT_EQ(g.size(), 1024u);
    EXPECT_DOUBLE_EQ(g.coord(0), -1.5);
    EXPECT_THROW(GridSpec(0, 8, 1.0), Error);
    EXPECT_THROW(GridSpec(2, 8, -1.0), Error);
    EXPECT_THROW(GridSpec(40, 1 << 20, 1.0), Error);
}

TEST(Gradient, ConstantHasZeroGradient) {
    GridSpec g(2, 16, 2.0);
    for (const auto& c : gradient(Field(g, 3.7))) EXPECT_LE(sup_norm(c), 1e-14);
}

TEST(Gradient, SingleModeExact) {
    GridSpec g(2, 32, 2.0);
    const double w = 2 * M_PI / g.L();
    Field f = make_field(g, [&](const std::vector<double>& x) { return std::sin(w * x[0]); });
    Field e = make_field(g, [&](const std::vector<double>& x) { return w * std::cos(w * x[0]); });
    auto G = gradient(f);
    EXPECT_LE(sup_norm(G[0] - e), 1e-12);
    EXPECT_LE(sup_norm(G[1]), 1e-12);
}

TEST(Gradient, BandLimitedMatchesCenteredDifference) {
    // explicit trigonometric polynomial, differentiated by centered differences of the formula itself
    GridSpec g(2, 16, 2.0);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N01;
    struct Mode { int p, q; double c, s; };
    std::vector<Mode> modes;
    for (int p = -5; p <= 5; ++p)
        for (int q = -5; q <= 5; ++q) modes.push_back({p, q, N01(rng), N01(rng)});
    const double w = 2 * M_PI / g.L();
    auto fx = [&](double x, double y) {
        double s = 0;
        for (auto& m : modes) s += m.c * std::cos(w * (m.p * x + m.q * y)) + m.s * std::sin(w * (m.p * x + m.q * y));
        return s;
    };
    Field f = make_field(g, [&](const std::vector<double>& x) { return fx(x[0], x[1]); });
    auto G = gradient(f);
    const double dlt = 1e-4 * g.h();
    for (int a = 0; a < 2; ++a) {
        Field fd = make_field(g, [&](const std::vector<double>& x) {
            double dx = a == 0 ? dlt : 0, dy = a == 1 ? dlt : 0;
            return (fx(x[0] + dx, x[1] + dy) - fx(x[0] - dx, x[1] - dy)) / (2 * dlt);
        });
        EXPECT_LE(oracle::rel(oracle::vec(G[a]), oracle::vec(fd)), 1e-3);
    }
}

TEST(Laplacian, ConstantAndEigenfunction) {
    GridSpec g(2, 16, 3.0);
    EXPECT_LE(sup_norm(laplacian(Field(g, 2.0))), 1e-13);
    const double w = 2 * M_PI / g.L();
    Field f = make_field(g, [&](const std::vector<double>& x) { return std::sin(w * x[0]); });
    EXPECT_LE(sup_norm(laplacian(f) + w * w * f), 1e-12);
}

TEST(Laplacian, MatchesDenseMatrix) {
    GridSpec g(2, 8, 1.7);
    std::mt19937_64 rng(3);
    Field f = oracle::random_field(g, rng);
    Eigen::VectorXd ref = oracle::laplacian_dense(g) * oracle::vec(f);
    EXPECT_LE(oracle::rel(oracle::vec(laplacian(f)), ref), 1e-10);
}

TEST(Laplacian, ZeroMean) {
    GridSpec g(3, 8, 1.0);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 5; ++t) {
        Field f = oracle::random_field(g, rng);
        EXPECT_LE(std::abs(laplacian(f).mean()), 1e-12 * lp_norm(f, 2));
    }
}

TEST(Helmholtz, ZeroModeAndSingleMode) {
    GridSpec g(2, 16, 2.0);
    Field c = helmholtz_solve(2.5, 1.0, Field(g, 5.0));
    EXPECT_LE(sup_norm(c - Field(g, 2.0)), 1e-13);
    const double w = 2 * M_PI / g.L();
    Field r = make_field(g, [&](const std::vector<double>& x) { return std::cos(w * x[0]); });
    EXPECT_LE(sup_norm(helmholtz_solve(1.0, 1.0, r) - r * (1.0 / (1 + w * w))), 1e-13);
}

TEST(Helmholtz, MatchesDenseLU) {
    GridSpec g(2, 16, 2.0);
    std::mt19937_64 rng(5);
    Field rhs = oracle::random_field(g, rng);
    const double alpha = 0.7, kappa = 0.3;
    Eigen::MatrixXd A = alpha * Eigen::MatrixXd::Identity(g.size(), g.size()) - kappa * oracle::laplacian_dense(g);
    Eigen::VectorXd ref = A.partialPivLu().solve(oracle::vec(rhs));
    Field f = helmholtz_solve(alpha, kappa, rhs);
    EXPECT_LE(oracle::rel(oracle::vec(f), ref), 1e-10);
    EXPECT_LE(lp_norm(helmholtz_apply(alpha, kappa, f) - rhs, 2), 1e-10 * lp_norm(rhs, 2));
}

TEST(Helmholtz, RejectsBadCoefficients) {
    GridSpec g(1, 8, 1.0);
    EXPECT_THROW(helmholtz_solve(0.0, 1.0, Field(g)), Error);
    EXPECT_THROW(helmholtz_solve(1.0, -1.0, Field(g)), Error);
}

TEST(Biharmonic, EigenfunctionZeroAndRejects) {
    GridSpec g(2, 16, 2.0);
    const double w = 2 * M_PI / g.L();
    Field r = make_field(g, [&](const std::vector<double>& x) { return std::cos(w * x[0]); });
    EXPECT_LE(sup_norm(biharmonic_inverse(r) - r * std::pow(w, -4)), 1e-13);
    EXPECT_LE(sup_norm(biharmonic_inverse(Field(g))), 0.0);
    EXPECT_THROW(biharmonic_inverse(Field(g, 1.0)), Error);
}

TEST(Biharmonic, MatchesDenseSolveOnMeanZeroSubspace) {
    GridSpec g(2, 8, 1.3);
    std::mt19937_64 rng(6);
    Field rhs = oracle::random_field(g, rng);
    rhs -= Field(g, rhs.mean());
    Eigen::MatrixXd Lp = oracle::laplacian_dense(g);
    // bordered system [B 1; 1^T 0] pins the mean to zero
    const int N = int(g.size());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N + 1, N + 1);
    B.topLeftCorner(N, N) = Lp * Lp;
    B.block(0, N, N, 1).setOnes();
    B.block(N, 0, 1, N).setOnes();
    Eigen::VectorXd r(N + 1);
    r.head(N) = oracle::vec(rhs);
    r(N) = 0;
    Eigen::VectorXd ref = B.fullPivLu().solve(r).head(N);
    EXPECT_LE(oracle::rel(oracle::vec(biharmonic_inverse(rhs)), ref), 1e-9);
}

TEST(Norms, TrivialCases) {
    GridSpec g(3, 8, 1.0);
    for (double p : {1.0, 1.5, 2.0, 3.0}) EXPECT_NEAR(lp_norm(Field(g, 1.0), p), 1.0, 1e-14);
    Field s(g);
    s[17] = 2.5;
    for (double p : {1.0, 2.0, 4.0}) EXPECT_NEAR(lp_norm(s, p), std::pow(g.cell_volume() * std::pow(2.5, p), 1 / p), 1e-14);
}

TEST(Norms, MatchSummationOracleAndHomogeneity) {
    GridSpec g(2, 16, 2.0);
    std::mt19937_64 rng(7);
    Field f = oracle::random_field(g, rng);
    for (double p : {1.0, 1.3, 2.0, 5.0}) {
        long double s = 0;
        for (double x : f.values) s += std::pow((long double)std::abs(x), (long double)p);
        double ref = double(std::pow(s * g.cell_volume(), 1.0L / p));
        EXPECT_NEAR(lp_norm(f, p), ref, 1e-12 * ref);
        EXPECT_NEAR(lp_norm(-3.0 * f, p), 3.0 * lp_norm(f, p), 1e-13 * ref);
    }
}

TEST(Norms, SobolevByParsevalAndDerivatives) {
    GridSpec g(2, 16, 2.0);
    std::mt19937_64 rng(8);
    Field f = oracle::random_field(g, rng);
    auto s = sobolev_norms(f);
    EXPECT_NEAR(s.L2, lp_norm(f, 2), 1e-12 * s.L2);
    // smooth field: derivative norms via spectral derivatives agree
    const double w = 2 * M_PI / g.L();
    Field q = make_field(g, [&](const std::vector<double>& x) { return std::sin(w * x[0]) * std::cos(2 * w * x[1]); });
    auto sq = sobolev_norms(q);
    double gsq = 0;
    for (auto& c : gradient(q)) gsq += std::pow(lp_norm(c, 2), 2);
    double hsq = 0;
    for (auto& c : gradient(q))
        for (auto& cc : gradient(c)) hsq += std::pow(lp_norm(cc, 2), 2);
    EXPECT_NEAR(sq.H1 * sq.H1, sq.L2 * sq.L2 + gsq, 1e-10);
    EXPECT_NEAR(sq.W22 * sq.W22, sq.L2 * sq.L2 + gsq + hsq, 1e-9);
    EXPECT_GE(sq.W32, sq.W22);
}

TEST(SecondMoment, CenterSpike) {
    GridSpec g(2, 32, 2.0);
    Field u(g);
    u[16 * 32 + 16] = 1.0 / g.cell_volume();
    DensityView dv(u);
    EXPECT_LE(second_moment(dv), g.h() * g.h() * g.d() / 4 * dv.mass() + 1e-15);
}

TEST(SecondMoment, UniformMatchesIntegral) {
    GridSpec g(3, 32, 2.0);
    auto u = uniform_density(g, 1.5);
    double ref = 1.5 * g.d() * g.L() * g.L() / 12;
    EXPECT_NEAR(second_moment(u), ref, 0.01 * ref);
}

TEST(SecondMoment, ShiftRule) {
    GridSpec g(2, 32, 8.0);
    auto bump = [&](double sx) {
        return DensityView(make_field(g, [&](const std::vector<double>& x) {
            return std::exp(-((x[0] - sx) * (x[0] - sx) + x[1] * x[1]) / 0.5);
        }));
    };
    DensityView a = bump(0.0), b = bump(1.0);
    // direct summation with the shifted coordinate
    double ref = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double x = g.coord(g.index_on_axis(i, 0)), y = g.coord(g.index_on_axis(i, 1));
        ref += (x * x + y * y) * b[i] * g.cell_volume();
    }
    EXPECT_NEAR(second_moment(b), ref, 0.01 * ref);
    EXPECT_NEAR(second_moment(b), second_moment(a) + a.mass() * 1.0, 0.01 * second_moment(b));
}

TEST(Mollify, PreservesMassAndUniform) {
    GridSpec g(2, 32, 4.0);
    auto u = uniform_density(g, 2.0);
    auto m = mollify_initial(u, 0.01);
    EXPECT_NEAR(m.mass(), 2.0, 1e-12 * 2.0);
    EXPECT_LE(sup_norm(m.field() - u.field()), 1e-12 * u.field().max());
    std::mt19937_64 rng(9);
    DensityView r(oracle::random_bumps(g, rng));
    auto mr = mollify_initial(r, 1e-4);
    EXPECT_NEAR(mr.mass(), r.mass(), 1e-12 * r.mass());
    EXPECT_LE(mr.field().max(), r.field().max() * (1 + 1e-12));
    double g0 = 0, g1 = 0;
    for (auto& c : gradient(r.field())) g0 += std::pow(lp_norm(c, 2), 2);
    for (auto& c : gradient(mr.field())) g1 += std::pow(lp_norm(c, 2), 2);
    EXPECT_LE(std::sqrt(g1), std::sqrt(g0) + 1e-12);
}

TEST(Mollify, SpikeSupportRadius) {
    GridSpec g(2, 64, 4.0);
    Field s(g);
    const int c = 32;
    s[c * 64 + c] = 1.0;
    DensityView spike(s);
    const double tau = 0.0625, radius = 1.0;
    auto m = mollify_initial(spike, tau, radius);
    const double r0 = radius * std::pow(tau, 1.0 / (2 * g.d()));
    double rmax = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (m[i] > 1e-14 * m.field().max()) {
            double dx = (g.index_on_axis(i, 0) - c) * g.h(), dy = (g.index_on_axis(i, 1) - c) * g.h();
            rmax = std::max(rmax, std::sqrt(dx * dx + dy * dy));
        }
    EXPECT_LE(rmax, r0);
    EXPECT_GE(rmax, r0 - 2 * g.h());
}

TEST(Mollify, RejectsNonPositiveTau) {
    GridSpec g(1, 16, 1.0);
    EXPECT_THROW(mollify_initial(uniform_density(g, 1.0), 0.0), Error);
}

TEST(Density, RejectsNegativeAndWrongMass) {
    GridSpec g(1, 8, 1.0);
    Field f(g, 1.0);
    f[3] = -0.5;
    EXPECT_THROW(DensityView{f}, Error);
    EXPECT_THROW(DensityView(Field(g, 1.0), 2.0), Error);
    Field z(g, 0.0);
    EXPECT_THROW(DensityView{z}, Error);
}

TEST(Snapshot, RoundTrip) {
    GridSpec g(2, 8, 3.0);
    std::mt19937_64 rng(10);
    Field f = oracle::random_field(g, rng);
    std::string stem = ::testing::TempDir() + "snap_rt";
    write_snapshot(stem, f, 0.125, 4.0);
    auto s = read_snapshot(stem);
    EXPECT_EQ(s.field.grid, g);
    EXPECT_EQ(s.field.values, f.values);
    EXPECT_EQ(s.time, 0.125);
    EXPECT_EQ(s.mass, 4.0);
}
