#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "error.hpp"

namespace chimera {

// Periodic box [origin, origin+L)^d with n points per axis. Row-major, last axis fastest.
class GridSpec {
public:
    GridSpec() = default;
    GridSpec(int d, int n, double L) : GridSpec(d, n, L, -0.5 * L) {}
    GridSpec(int d, int n, double L, double origin) : d_(d), n_(n), L_(L), origin_(origin) {
        require(d >= 1, "grid: dimension must be positive");
        require(n >= 1, "grid: points per axis must be positive");
        require(L > 0 && std::isfinite(L), "grid: box length must be positive");
        std::size_t total = 1;
        for (int a = 0; a < d; ++a) {
            if (total > std::numeric_limits<std::ptrdiff_t>::max() / std::size_t(n))
                throw Error("grid: n^d overflows the index type");
            total *= std::size_t(n);
        }
        size_ = total;
        h_ = L / n;
    }

    int d() const { return d_; }
    int n() const { return n_; }
    double L() const { return L_; }
    double h() const { return h_; }
    double origin() const { return origin_; }
    std::size_t size() const { return size_; }
    double cell_volume() const { return std::pow(h_, d_); }
    double volume() const { return std::pow(L_, d_); }
    double coord(int i) const { return origin_ + i * h_; }
    double center() const { return origin_ + 0.5 * L_; }

    // stride of axis a in the flat array
    std::size_t stride(int a) const {
        std::size_t s = 1;
        for (int b = a + 1; b < d_; ++b) s *= std::size_t(n_);
        return s;
    }
    int index_on_axis(std::size_t flat, int a) const { return int((flat / stride(a)) % std::size_t(n_)); }

    // minimal-image signed offset x - c along one axis
    double wrap(double dx) const { return dx - L_ * std::round(dx / L_); }

    bool operator==(const GridSpec& o) const {
        return d_ == o.d_ && n_ == o.n_ && L_ == o.L_ && origin_ == o.origin_;
    }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }

private:
    int d_ = 1;
    int n_ = 1;
    double L_ = 1.0;
    double origin_ = -0.5;
    double h_ = 1.0;
    std::size_t size_ = 1;
};

struct Field {
    GridSpec grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const GridSpec& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    Field(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        require(values.size() == grid.size(), "field: value count does not match grid");
    }

    std::size_t size() const { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double sum() const {
        double s = 0;
        for (double x : values) s += x;
        return s;
    }
    double integral() const { return sum() * grid.cell_volume(); }
    double mean() const { return sum() / double(size()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }
    double min() const { return *std::min_element(values.begin(), values.end()); }
    bool finite() const {
        for (double x : values)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Field& operator+=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < size(); ++i) values[i] += o.values[i];
        return *this;
    }
    Field& operator-=(const Field& o) {
        check_same(o);
        for (std::size_t i = 0; i < size(); ++i) values[i] -= o.values[i];
        return *this;
    }
    Field& operator*=(double c) {
        for (double& x : values) x *= c;
        return *this;
    }
    void check_same(const Field& o) const { require(grid == o.grid, "field: grid mismatch"); }
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double c, Field a) { return a *= c; }
inline Field operator*(Field a, double c) { return a *= c; }

inline double dot(const Field& a, const Field& b) {
    a.check_same(b);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * a.grid.cell_volume();
}

template <class Fn>
Field make_field(const GridSpec& g, Fn&& fn) {
    Field f(g);
    std::vector<double> x(g.d());
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::size_t r = i;
        for (int a = g.d() - 1; a >= 0; --a) {
            x[a] = g.coord(int(r % g.n()));
            r /= g.n();
        }
        f[i] = fn(x);
    }
    return f;
}

// Density with a declared total mass. Negative dips down to tol_neg are tolerated.
class DensityView {
public:
    static constexpr double neg_rel = 1e-12;
    static constexpr double mass_rel = 1e-10;

    DensityView() = default;
    explicit DensityView(Field f) : field_(std::move(f)) {
        mass_ = field_.integral();
        validate();
    }
    DensityView(Field f, double declared_mass) : field_(std::move(f)) {
        mass_ = field_.integral();
        validate();
        require(std::abs(mass_ - declared_mass) <= mass_rel * std::abs(declared_mass),
                "density: mass differs from declared value");
    }

    const Field& field() const { return field_; }
    const GridSpec& grid() const { return field_.grid; }
    double mass() const { return mass_; }
    double operator[](std::size_t i) const { return field_[i]; }
    std::size_t size() const { return field_.size(); }

    Field clamped() const {
        Field c = field_;
        for (double& x : c.values) x = std::max(x, 0.0);
        return c;
    }
    double tol_neg() const { return neg_rel * std::max(field_.max(), 0.0); }

private:
    void validate() const {
        require(field_.finite(), "density: non-finite value");
        require(mass_ > 0, "density: mass must be positive");
        require(field_.min() >= -tol_neg(), "density: negative value below tolerance");
    }

    Field field_;
    double mass_ = 0;
};

// uniform density of mass M
inline DensityView uniform_density(const GridSpec& g, double M) {
    return DensityView(Field(g, M / g.volume()));
}

}  // namespace chimera
