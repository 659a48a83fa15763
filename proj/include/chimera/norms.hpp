#pragma once

#include <cmath>
#include <vector>

#include "grid.hpp"
#include "spectral.hpp"

namespace chimera {

// (h^d sum |f|^p)^(1/p)
inline double lp_norm(const Field& f, double p) {
    require(p >= 1, "lp_norm: p must be >= 1");
    double s = 0;
    if (p == 1) {
        for (double x : f.values) s += std::abs(x);
        return s * f.grid.cell_volume();
    }
    if (p == 2) {
        for (double x : f.values) s += x * x;
        return std::sqrt(s * f.grid.cell_volume());
    }
    for (double x : f.values) s += std::pow(std::abs(x), p);
    return std::pow(s * f.grid.cell_volume(), 1.0 / p);
}

inline double sup_norm(const Field& f) {
    double s = 0;
    for (double x : f.values) s = std::max(s, std::abs(x));
    return s;
}

struct SobolevNorms {
    double L2 = 0, H1 = 0, W22 = 0, W32 = 0;
};

// Full derivative norms through Fourier weights: |D^j f|^2 summed over all index tuples is |k|^(2j).
inline SobolevNorms sobolev_norms(const Field& f) {
    Spectrum s = forward(f);
    double e[4] = {0, 0, 0, 0};
    std::vector<double> kv(f.grid.d());
    s.for_each_mode([&](std::size_t idx, const std::vector<int>& j) {
        for (int a = 0; a < f.grid.d(); ++a) kv[a] = s.k(j[a]);
        double k2 = ksq(kv), a2 = s.weight(j) * std::norm(s.c[idx]);
        e[0] += a2;
        e[1] += a2 * k2;
        e[2] += a2 * k2 * k2;
        e[3] += a2 * k2 * k2 * k2;
    });
    double sc = f.grid.cell_volume() / double(f.grid.size());
    SobolevNorms r;
    r.L2 = std::sqrt(e[0] * sc);
    r.H1 = std::sqrt((e[0] + e[1]) * sc);
    r.W22 = std::sqrt((e[0] + e[1] + e[2]) * sc);
    r.W32 = std::sqrt((e[0] + e[1] + e[2] + e[3]) * sc);
    return r;
}

// squared minimal-image distance of every cell to the box center
inline Field centered_radius_sq(const GridSpec& g) {
    const double c = g.center();
    return make_field(g, [&](const std::vector<double>& x) {
        double r2 = 0;
        for (double xa : x) {
            double dx = g.wrap(xa - c);
            r2 += dx * dx;
        }
        return r2;
    });
}

inline double second_moment(const DensityView& u) {
    return dot(centered_radius_sq(u.grid()), u.field());
}

// fraction of mass within `width` of the periodic seam along any axis
inline double seam_mass_fraction(const DensityView& u, double width) {
    const auto& g = u.grid();
    const double c = g.center();
    double near = 0;
    std::vector<double> x(g.d());
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t r = i;
        bool close = false;
        for (int a = g.d() - 1; a >= 0; --a) {
            double dx = std::abs(g.wrap(g.coord(int(r % g.n())) - c));
            r /= g.n();
            close = close || (0.5 * g.L() - dx) < width;
        }
        if (close) near += std::max(u[i], 0.0);
    }
    return near * g.cell_volume() / u.mass();
}

// Compact bump exp(-1/(1-r^2)) of radius radius*tau^(1/(2d)), circular convolution, mass restored.
inline DensityView mollify_initial(const DensityView& u0, double tau, double radius = 1.0) {
    require(tau > 0, "mollify_initial: tau must be positive");
    require(radius > 0, "mollify_initial: radius must be positive");
    const auto& g = u0.grid();
    const double r0 = radius * std::pow(tau, 1.0 / (2.0 * g.d()));
    Field ker(g);
    std::vector<double> x(g.d());
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t r = i;
        double r2 = 0;
        for (int a = g.d() - 1; a >= 0; --a) {
            double dx = g.wrap(double(r % g.n()) * g.h());
            r /= g.n();
            r2 += dx * dx;
        }
        double q = r2 / (r0 * r0);
        ker[i] = q < 1 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
    }
    double ks = ker.sum();
    if (!(ks > 0)) return u0;  // kernel narrower than a cell
    ker *= 1.0 / ks;
    Spectrum su = forward(u0.field()), sk = forward(ker);
    for (std::size_t i = 0; i < su.c.size(); ++i) su.c[i] *= sk.c[i];
    Field out = inverse(su);
    for (double& v : out.values) v = std::max(v, 0.0);
    out *= u0.mass() / out.integral();
    return DensityView(out, u0.mass());
}

}  // namespace chimera
