#include <gtest/gtest.h>

#include <map>
#include <random>
#include <sstream>

#include "chimera/critical.hpp"
#include "oracles.hpp"

using namespace chimera;

namespace {

Rational R(long long a, long long b = 1) { return Rational(a, b); }

ModelParams crit_params(int d) {
    ModelParams p;
    p.d = d;
    p.m = 2.0 - 4.0 / d;
    p.kap1 = 0.8;
    p.kap2 = 1.25;
    p.eps1 = 1.0;
    p.eps2 = 0.6;
    return p;
}

std::map<std::string, std::string> parse_report(const std::string& s) {
    std::map<std::string, std::string> kv;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

// the d = 5 estimate is shared by several tests
const CriticalMassEstimate& d5_estimate() {
    static CriticalMassEstimate est = [] {
        GridSpec g(5, 8, 1.0);
        return estimate_C_star(g, crit_params(5), uniform_density(g, 1.0), 500, 1e-6);
    }();
    return est;
}

}  // namespace

TEST(Exponents, CriticalSixDimensions) {
    auto e = exponents(R(4, 3), 6);
    EXPECT_EQ(e.regime, ExponentRegime::critical);
    EXPECT_EQ(e.theta, R(2, 3));
    EXPECT_EQ(e.one_minus_theta, R(1, 3));
    EXPECT_EQ(e.p_star, R(5, 3));
    EXPECT_EQ(e.q_star, R(5, 3));
}

TEST(Exponents, SquareExponentTakesSecondBranch) {
    for (int d = 5; d <= 12; ++d) {
        auto e = exponents(R(2), d);
        EXPECT_EQ(e.p_star, R(2));
        EXPECT_EQ(e.q_star, R(2));
        EXPECT_TRUE(e.uniform_L2_ok);
        EXPECT_EQ(e.regime, ExponentRegime::subcritical);
    }
}

TEST(Exponents, ExactIdentitiesOverAGrid) {
    for (int d = 5; d <= 10; ++d)
        for (long long num = 11; num <= 40; ++num) {
            Rational m(num, 10);
            auto e = exponents(m, d);
            EXPECT_EQ(e.theta + e.one_minus_theta, R(1));
            EXPECT_EQ(e.l1_power + e.lm_power, R(2));
            Rational crit = R(2) - R(4, d);
            EXPECT_EQ(e.regime == ExponentRegime::critical, m == crit);
            EXPECT_EQ(e.regime == ExponentRegime::subcritical, m > crit);
            EXPECT_LE(e.q_star, R(2));
        }
    // at the critical exponent the L1 power is 4/d
    for (int d = 5; d <= 10; ++d) EXPECT_EQ(exponents(R(2) - R(4, d), d).l1_power, R(4, d));
}

TEST(Exponents, EquivalencesAgreeAsBooleans) {
    // both sides are evaluated independently inside exponents(); reaching here means they agreed
    for (int d = 5; d <= 10; ++d)
        for (long long num = 101; num < 200; num += 3) {
            Rational m(num, 100);
            auto e = exponents(m, d);
            EXPECT_EQ(e.above_lower, m > R(2 * d, d + 4));
            EXPECT_EQ(e.below_upper, m < R(d, 2));
        }
}

TEST(Exponents, UniformL2Condition) {
    // d = 6, m = 4/3: (16/3 + 4)/(6 * 2/3) = 7/3 >= 2
    EXPECT_TRUE(exponents(R(4, 3), 6).uniform_L2_ok);
    // d = 5, m = 6/5: (24/5 + 2)/(5 * 4/5) = 17/10 < 2
    EXPECT_FALSE(exponents(R(6, 5), 5).uniform_L2_ok);
}

TEST(Exponents, RejectsLowDimensionAndExponent) {
    EXPECT_THROW(exponents(R(2), 4), Error);
    EXPECT_THROW(exponents(R(2), 1), Error);
    EXPECT_THROW(exponents(R(1), 6), Error);
    EXPECT_THROW(exponents(R(1, 2), 6), Error);
}

TEST(Exponents, DoubleInputRecoversTheRational) {
    EXPECT_EQ(to_rational(1.2), R(6, 5));
    EXPECT_EQ(to_rational(4.0 / 3), R(4, 3));
    EXPECT_EQ(to_rational(2.0 - 4.0 / 7), R(10, 7));
    EXPECT_EQ(exponents(2.0 - 4.0 / 6, 6).regime, ExponentRegime::critical);
    EXPECT_THROW(to_rational(M_PI), Error);
}

TEST(CStar, UniformStartIsSeeded) {
    const auto& est = d5_estimate();
    EXPECT_GT(est.C_star_sq, 0.0);
    EXPECT_GT(est.u.max(), 2 * est.u.integral() / est.grid.volume());
}

TEST(CStar, ConvergesAtFiveDimensions) {
    const auto& est = d5_estimate();
    EXPECT_TRUE(est.converged);
    EXPECT_LE(est.fixed_point_residual, 1e-6);
    EXPECT_TRUE(est.critical);
}

TEST(CStar, RatioNeverDecreases) {
    const auto& h = d5_estimate().history;
    ASSERT_GE(h.size(), 2u);
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1] * (1 - 1e-12));
}

TEST(CStar, RandomSearchStaysBelow) {
    const auto& est = d5_estimate();
    auto e = exponents(R(6, 5), 5);
    std::mt19937_64 rng(51);
    for (int t = 0; t < 200; ++t) {
        Field f = t % 2 ? oracle::random_bumps(est.grid, rng, 1 + t % 4) : oracle::random_field(est.grid, rng, 0, 1);
        EXPECT_LE(sharp_ratio(f, e), 1.001 * est.C_star_sq) << "sample " << t;
    }
}

TEST(CStar, LocalPerturbationsStayBelow) {
    const auto& est = d5_estimate();
    auto e = exponents(R(6, 5), 5);
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> U(-1, 1);
    for (int t = 0; t < 50; ++t) {
        Field f = est.u;
        for (double& x : f.values) x = std::max(0.0, x * (1 + 0.05 * U(rng)) + 0.01 * U(rng));
        EXPECT_LE(sharp_ratio(f, e), est.C_star_sq * (1 + 1e-9));
    }
}

TEST(CStar, RandomStartsAgree) {
    const auto& est = d5_estimate();
    std::mt19937_64 rng(53);
    for (int t = 0; t < 3; ++t) {
        Field f = oracle::random_bumps(est.grid, rng, 2, 0.01);
        f *= 1.0 / f.integral();
        auto e2 = estimate_C_star(est.grid, crit_params(5), DensityView(f, 1.0));
        EXPECT_TRUE(e2.converged);
        EXPECT_NEAR(e2.C_star_sq, est.C_star_sq, 1e-6 * est.C_star_sq);
    }
}

TEST(CStar, HomogeneousOfDegreeZero) {
    const auto& est = d5_estimate();
    auto e = exponents(R(6, 5), 5);
    double r1 = sharp_ratio(est.u, e), r2 = sharp_ratio(est.u * 2.0, e);
    EXPECT_NEAR(r2, r1, 1e-10 * r1);
    EXPECT_NEAR(r1, est.C_star_sq, 1e-14 * r1);
}

TEST(CStar, CriticalMassRecomputesBitwise) {
    const auto& est = d5_estimate();
    auto p = crit_params(5);
    EXPECT_EQ(est.M_star, m_star_from(est.C_star_sq, 5, p.kap1, p.kap2));
    double direct = std::pow(10.0 * p.kap1 * p.kap2 / est.C_star_sq, 1.25);
    EXPECT_NEAR(est.M_star, direct, 1e-12 * direct);
}

TEST(CStar, ReportCarriesTheFields) {
    const auto& est = d5_estimate();
    auto kv = parse_report(critical_report(est, crit_params(5)));
    for (const char* k : {"C_star_sq", "M_star", "residual", "iterations", "grid", "interpretation"})
        EXPECT_TRUE(kv.count(k)) << k;
    EXPECT_EQ(std::stod(kv["C_star_sq"]), est.C_star_sq);
    EXPECT_EQ(std::stod(kv["M_star"]), est.M_star);
    EXPECT_EQ(kv["interpretation"], "critical-mass");
    EXPECT_EQ(kv["grid"], "d5 n8 L1 origin-0.5");
}

TEST(CStar, NonCriticalExponentIsRatioOnly) {
    GridSpec g(5, 6, 1.0);
    ModelParams p = crit_params(5);
    p.m = 1.5;
    auto est = estimate_C_star(g, p, uniform_density(g, 1.0), 200, 1e-6);
    EXPECT_FALSE(est.critical);
    EXPECT_EQ(parse_report(critical_report(est, p))["interpretation"], "ratio only");
}

TEST(CStar, RejectsLowDimension) {
    GridSpec g(4, 6, 1.0);
    ModelParams p = crit_params(4);
    p.m = 1.5;
    EXPECT_THROW(estimate_C_star(g, p, uniform_density(g, 1.0)), Error);
}

TEST(L0, EqualsLWithoutDecay) {
    std::mt19937_64 rng(54);
    GridSpec g(2, 16, 3.0);
    ModelParams p = crit_params(2);
    p.m = 1.7;
    DensityView u(oracle::random_field(g, rng, 0.1, 1.0));
    Field v = oracle::random_field(g, rng), w = oracle::random_field(g, rng);
    double L = eval_L(u, v, w, p).L, L0 = eval_L0(u, v, w, p);
    EXPECT_NEAR(L0, L, 1e-12 * std::abs(L));
}

TEST(L0, InternalEnergyOnly) {
    std::mt19937_64 rng(55);
    GridSpec g(2, 16, 3.0);
    ModelParams p = crit_params(2);
    p.m = 1.7;
    DensityView u(oracle::random_field(g, rng, 0.1, 1.0));
    Field z(g);
    EXPECT_NEAR(eval_L0(u, z, z, p), std::pow(lm_norm(u.field(), p.m), p.m) / (p.m - 1), 1e-12);
}

TEST(L0, MatchesDenseSummation) {
    std::mt19937_64 rng(56);
    GridSpec g(2, 12, 2.5);
    ModelParams p = crit_params(2);
    p.m = 1.4;
    p.gam1 = 0.7;  // must be ignored
    p.gam2 = 0.3;
    DensityView u(oracle::random_field(g, rng, 0.1, 1.0));
    Field v = oracle::random_field(g, rng), w = oracle::random_field(g, rng);
    Eigen::MatrixXd Lap = oracle::laplacian_dense(g);
    Eigen::VectorXd lv = Lap * oracle::vec(v), uu = oracle::vec(u.field()), vv = oracle::vec(v);
    Eigen::VectorXd r = p.kap1 * lv + oracle::vec(w);
    double hd = g.cell_volume(), s = 0;
    for (Eigen::Index i = 0; i < uu.size(); ++i) s += std::pow(uu[i], p.m) / (p.m - 1) - uu[i] * vv[i];
    double ref = hd * (s + 0.5 * p.kap1 * p.kap2 * lv.squaredNorm() + p.eps2 / (2 * p.eps1) * r.squaredNorm());
    EXPECT_NEAR(eval_L0(u, v, w, p), ref, 1e-12 * std::abs(ref));
}

namespace {

struct SixDTriple {
    GridSpec g{6, 12, 2.0};
    ModelParams p = crit_params(6);
    NormalizedTriple t;
    double L0 = 0;
    SixDTriple() {
        Field U = oracle::radial_bump(g, 0.95, 1.0, 4);
        U *= 1.0 / U.integral();
        t = critical_triple(U, oracle::radial_bump(g, 0.95, 0.5, 4), 0.1, p);
        L0 = eval_L0(DensityView(t.U), t.V, t.W, p);
    }
};

const SixDTriple& six_d() {
    static SixDTriple s;
    return s;
}

double scaled_L0(const ScaledTriple& s, const ModelParams& p) {
    Field u = s.U;
    for (double& x : u.values) x = std::max(x, 0.0);  // interpolation ringing outside the support
    return eval_L0(DensityView(u), s.V, s.W, p);
}

}  // namespace

TEST(Scaling, IdentityAtOne) {
    std::mt19937_64 rng(57);
    GridSpec g(2, 16, 2.0);
    Field U = oracle::radial_bump(g, 0.6, 1.0, 2), V = oracle::random_field(g, rng), W = oracle::random_field(g, rng);
    auto s = scaling_family(U, V, W, 1.0, 1.5);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_NEAR(s.U[i], U[i], 1e-12);
        EXPECT_NEAR(s.V[i], V[i], 1e-12);
        EXPECT_NEAR(s.W[i], W[i], 1e-12);
    }
}

TEST(Scaling, NormTableAndLyapunovLaw) {
    const auto& six = six_d();
    for (double lam : {1.5, 2.0}) {
        auto s = scaling_family(six.t.U, six.t.V, six.t.W, lam, six.p.m);
        EXPECT_TRUE(s.within(0.01)) << "lambda " << lam << ": " << s.l1_ratio << " " << s.lm_ratio << " "
                                    << s.lap_ratio;
        double ratio = scaled_L0(s, six.p) / six.L0 / std::pow(lam, 2);
        RecordProperty("L0_ratio_over_lambda_sq_" + std::to_string(lam), std::to_string(ratio));
        EXPECT_GE(ratio, 0.95);
        EXPECT_LE(ratio, 1.05);
    }
}

TEST(Scaling, YoungEqualityFromAlpha) {
    const auto& six = six_d();
    const auto& p = six.p;
    auto e = exponents(p.m, 6);
    double C = 0.1, M = six.t.U.integral();
    double a = six.t.alpha;
    Field lapV = laplacian(six.t.V * a);  // the unnormalized V
    double left = a / (2 * p.kap1 * p.kap2) * C * C * std::pow(M, 2 * to_double(e.one_minus_theta)) *
                  std::pow(lm_norm(six.t.U, p.m), 2 * to_double(e.theta));
    double right = p.kap1 * p.kap2 / (2 * a) * dot(lapV, lapV);
    EXPECT_NEAR(left, right, 1e-12 * right);
    // W is -kap1 Lap V / alpha, so the coupling term of L0 vanishes
    Field r = laplacian(six.t.V) * p.kap1 + six.t.W;
    EXPECT_LE(std::sqrt(dot(r, r)), 1e-12 * std::sqrt(dot(six.t.W, six.t.W)));
}

TEST(Scaling, RejectsWrapAround) {
    GridSpec g(1, 32, 2.0);
    Field U = oracle::radial_bump(g, 0.9, 1.0, 2), Z(g);
    EXPECT_THROW(scaling_family(U, Z, Z, 0.5, 1.5), Error);
    EXPECT_NO_THROW(scaling_family(U, Z, Z, 0.95, 1.5));
}
