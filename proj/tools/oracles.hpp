#pragma once
// Independent reference computations, shared by the tests and the selftest subcommand.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "chimera/grid.hpp"
#include "chimera/model.hpp"

namespace oracle {

using chimera::Field;
using chimera::GridSpec;
using chimera::DensityView;
using chimera::ModelParams;

// 1D second-derivative matrix by direct cosine sums over the same wavenumbers
inline Eigen::MatrixXd d2_1d(int n, double L) {
    Eigen::MatrixXd D(n, n);
    const double h = L / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int q = 0; q < n; ++q) {
                int qq = (2 * q <= n) ? q : q - n;
                double k = 2 * M_PI / L * qq;
                s += -k * k * std::cos(k * (i - j) * h);
            }
            D(i, j) = s / n;
        }
    return D;
}

// 1D first-derivative matrix by direct sine sums; the Nyquist mode is dropped
inline Eigen::MatrixXd d1_1d(int n, double L) {
    Eigen::MatrixXd D(n, n);
    const double h = L / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0;
            for (int q = 0; q < n; ++q) {
                if (2 * q == n) continue;
                int qq = (2 * q < n) ? q : q - n;
                double k = 2 * M_PI / L * qq;
                s += -k * std::sin(k * (i - j) * h);
            }
            D(i, j) = s / n;
        }
    return D;
}

// derivative along axis a as a dense matrix, flat index row-major
inline Eigen::MatrixXd axis_dense(const GridSpec& g, int a, const Eigen::MatrixXd& D) {
    const std::size_t N = g.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t r = 0; r < N; ++r)
        for (std::size_t c = 0; c < N; ++c) {
            bool same = true;
            for (int b = 0; b < g.d(); ++b)
                if (b != a && g.index_on_axis(r, b) != g.index_on_axis(c, b)) same = false;
            if (same) A(r, c) = D(g.index_on_axis(r, a), g.index_on_axis(c, a));
        }
    return A;
}

// Laplacian on d axes as a Kronecker sum, flat index row-major
inline Eigen::MatrixXd laplacian_dense(const GridSpec& g) {
    const int n = g.n();
    Eigen::MatrixXd D = d2_1d(n, g.L());
    const std::size_t N = g.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
    for (std::size_t r = 0; r < N; ++r)
        for (std::size_t c = 0; c < N; ++c) {
            double s = 0;
            for (int a = 0; a < g.d(); ++a) {
                bool same = true;
                for (int b = 0; b < g.d(); ++b)
                    if (b != a && g.index_on_axis(r, b) != g.index_on_axis(c, b)) same = false;
                if (same) s += D(g.index_on_axis(r, a), g.index_on_axis(c, a));
            }
            A(r, c) = s;
        }
    return A;
}

inline Eigen::VectorXd vec(const Field& f) { return Eigen::Map<const Eigen::VectorXd>(f.values.data(), f.size()); }

inline double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

inline Field random_field(const GridSpec& g, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> U(lo, hi);
    Field f(g);
    for (double& x : f.values) x = U(rng);
    return f;
}

// smooth positive bumps inside the central half of the box
inline Field random_bumps(const GridSpec& g, std::mt19937_64& rng, int count = 3, double floor = 0.0) {
    std::uniform_real_distribution<double> pos(-0.2 * g.L(), 0.2 * g.L()), wid(0.04 * g.L(), 0.08 * g.L()),
        amp(0.3, 1.0);
    std::vector<std::vector<double>> c(count, std::vector<double>(g.d()));
    std::vector<double> w(count), A(count);
    for (int k = 0; k < count; ++k) {
        for (double& x : c[k]) x = pos(rng);
        w[k] = wid(rng);
        A[k] = amp(rng);
    }
    return chimera::make_field(g, [&](const std::vector<double>& x) {
        double s = floor;
        for (int k = 0; k < count; ++k) {
            double r2 = 0;
            for (int a = 0; a < g.d(); ++a) r2 += (x[a] - c[k][a]) * (x[a] - c[k][a]);
            s += A[k] * std::exp(-r2 / (2 * w[k] * w[k]));
        }
        return s;
    });
}

// sum of cos^2 bumps with compact support, centers within +-spread*L of the middle
inline Field random_compact(const GridSpec& g, std::mt19937_64& rng, int count = 3, double spread = 0.15,
                            double wmin = 0.03, double wmax = 0.08) {
    std::uniform_real_distribution<double> pos(-spread * g.L(), spread * g.L()), wid(wmin * g.L(), wmax * g.L()),
        amp(0.3, 1.0);
    std::vector<std::vector<double>> c(count, std::vector<double>(g.d()));
    std::vector<double> w(count), A(count);
    for (int k = 0; k < count; ++k) {
        for (double& x : c[k]) x = pos(rng);
        w[k] = wid(rng);
        A[k] = amp(rng);
    }
    return chimera::make_field(g, [&](const std::vector<double>& x) {
        double s = 0;
        for (int k = 0; k < count; ++k) {
            double r2 = 0;
            for (int a = 0; a < g.d(); ++a) r2 += (x[a] - c[k][a]) * (x[a] - c[k][a]);
            double r = std::sqrt(r2) / w[k];
            if (r < 1) s += A[k] * std::pow(std::cos(M_PI * r / 2), 2);
        }
        return s;
    });
}

// radial cos^power bump about the origin
inline Field radial_bump(const GridSpec& g, double radius, double amp, int power) {
    return chimera::make_field(g, [&](const std::vector<double>& x) {
        double r2 = 0;
        for (double t : x) r2 += t * t;
        double r = std::sqrt(r2) / radius;
        return r < 1 ? amp * std::pow(std::cos(M_PI * r / 2), power) : 0.0;
    });
}

// same total mass as `ref`
inline chimera::DensityView rescaled(const Field& f, double mass) {
    Field c = f;
    c *= mass / f.integral();
    return chimera::DensityView(c);
}

// monotone coupling in 1D as (i, j, mass) triples
struct Piece { std::size_t i, j; double m; };
inline std::vector<Piece> quantile_plan(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    std::vector<Piece> out;
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0];
    while (i < n && j < n) {
        if (ra <= rb) {
            if (ra > 0) out.push_back({i, j, ra});
            rb -= ra;
            if (++i < n) ra = a[i];
        } else {
            if (rb > 0) out.push_back({i, j, rb});
            ra -= rb;
            if (++j < n) rb = b[j];
        }
    }
    return out;
}

// W2^2 in mass units between 1D grid measures by monotone rearrangement (no wrap assumed)
inline double quantile_w2sq(const std::vector<double>& x, const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    std::size_t i = 0, j = 0;
    double ra = a[0], rb = b[0], cost = 0;
    while (i < n && j < n) {
        double c = (x[i] - x[j]) * (x[i] - x[j]);
        if (ra <= rb) {
            cost += ra * c;
            rb -= ra;
            if (++i < n) ra = a[i];
        } else {
            cost += rb * c;
            ra -= rb;
            if (++j < n) rb = b[j];
        }
    }
    return cost;
}

// dense (alpha - kappa Lap) x = rhs
inline Eigen::VectorXd dense_helmholtz(const GridSpec& g, double alpha, double kappa, const Field& rhs) {
    Eigen::MatrixXd A = -kappa * laplacian_dense(g);
    A.diagonal().array() += alpha;
    return A.partialPivLu().solve(vec(rhs));
}

// Euclidean projection onto {x >= 0, sum x = b}
inline void project_simplex(std::vector<double>& y, double b) {
    std::vector<double> s = y;
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0, theta = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        double t = (cum - b) / double(k + 1);
        if (k + 1 == s.size() || s[k + 1] <= t) {
            theta = t;
            break;
        }
    }
    for (double& x : y) x = std::max(x - theta, 0.0);
}

// min over plans with column sums b of E(rows) + <C, P>/(2 tau), by accelerated projected gradient.
// Its value is min_u E(u) + W2^2(u, prev)/(2 tau) with the exact discrete distance.
inline double brute_force_jko(const GridSpec& g, const DensityView& prev, const Field& v, const ModelParams& p) {
    const int n = g.n();
    const double h = g.h();
    std::vector<double> b(n), C(n * n);
    for (int j = 0; j < n; ++j) b[j] = prev[j] * h;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double dx = g.wrap((i - j) * h);
            C[i * n + j] = dx * dx;
        }
    auto value = [&](const std::vector<double>& P) {
        double s = 0;
        for (int i = 0; i < n; ++i) {
            double r = 0;
            for (int j = 0; j < n; ++j) r += P[i * n + j];
            double u = r / h;
            s += h * (std::pow(u, p.m) / (p.m - 1) - u * v[i]);
        }
        for (int k = 0; k < n * n; ++k) s += P[k] * C[k] / (2 * p.tau);
        return s;
    };
    auto grad = [&](const std::vector<double>& P, std::vector<double>& G) {
        for (int i = 0; i < n; ++i) {
            double r = 0;
            for (int j = 0; j < n; ++j) r += P[i * n + j];
            double u = std::max(r / h, 0.0);
            double e = p.m * std::pow(u, p.m - 1) / (p.m - 1) - v[i];
            for (int j = 0; j < n; ++j) G[i * n + j] = e + C[i * n + j] / (2 * p.tau);
        }
    };
    // Lipschitz bound of the gradient for m = 2: row-sum operator has norm^2 = n
    const double Lip = 2.0 * n / h;
    std::vector<double> P(n * n, 0.0), Y, G(n * n), Pn(n * n), col(n);
    for (int j = 0; j < n; ++j) P[j * n + j] = b[j];
    Y = P;
    double t = 1;
    for (int it = 0; it < 200000; ++it) {
        grad(Y, G);
        for (int k = 0; k < n * n; ++k) Pn[k] = Y[k] - G[k] / Lip;
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) col[i] = Pn[i * n + j];
            project_simplex(col, b[j]);
            for (int i = 0; i < n; ++i) Pn[i * n + j] = col[i];
        }
        double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
        for (int k = 0; k < n * n; ++k) Y[k] = Pn[k] + (t - 1) / tn * (Pn[k] - P[k]);
        t = tn;
        P.swap(Pn);
    }
    return value(P);
}

}  // namespace oracle
