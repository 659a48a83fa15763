#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "grid.hpp"

namespace chimera {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// n x n log-weights for one axis, row = output index
struct AxisLogKernel {
    int n = 0;
    std::vector<double> m;
    double operator()(int i, int j) const { return m[std::size_t(i) * n + j]; }
};

namespace testing_hooks {
// scales the ground cost inside every kernel; 1 in normal use. The selftest flips it to prove it can fail.
inline double& kernel_distortion() {
    static double s = 1.0;
    return s;
}
}  // namespace testing_hooks

enum class KernelKind { plain, pos_out_minus_in, neg_out_minus_in, squared };

// log of exp(-wrap(x_out-x_in)^2/eps), optionally times the positive or negative part of
// wrap(x_out-x_in), or its square
inline AxisLogKernel make_axis_kernel(const GridSpec& g, double eps, KernelKind kind) {
    AxisLogKernel k;
    k.n = g.n();
    k.m.resize(std::size_t(k.n) * k.n);
    for (int i = 0; i < k.n; ++i)
        for (int j = 0; j < k.n; ++j) {
            double dx = g.wrap((i - j) * g.h());
            double v = -testing_hooks::kernel_distortion() * dx * dx / eps;
            if (kind == KernelKind::pos_out_minus_in) v = dx > 0 ? v + std::log(dx) : neg_inf;
            if (kind == KernelKind::neg_out_minus_in) v = dx < 0 ? v + std::log(-dx) : neg_inf;
            if (kind == KernelKind::squared) v = dx != 0 ? v + 2 * std::log(std::abs(dx)) : neg_inf;
            k.m[std::size_t(i) * k.n + j] = v;
        }
    return k;
}

// out[i] = log sum_j exp(in[j] + sum_a K_a(i_a, j_a)), one axis at a time.
// Terms more than `cut` below the running maximum are dropped.
inline std::vector<double> log_convolve(const GridSpec& g, const std::vector<double>& in,
                                        const std::vector<const AxisLogKernel*>& ker, double cut = 50.0) {
    const int n = g.n();
    std::vector<double> cur = in, next(in.size());
    std::vector<double> line(n), t(n);
    for (int a = 0; a < g.d(); ++a) {
        const AxisLogKernel& K = *ker[a];
        const std::size_t st = g.stride(a);
        const std::size_t block = st * n;
        for (std::size_t outer = 0; outer < g.size(); outer += block)
            for (std::size_t inner = 0; inner < st; ++inner) {
                const std::size_t base = outer + inner;
                for (int j = 0; j < n; ++j) line[j] = cur[base + j * st];
                for (int i = 0; i < n; ++i) {
                    const double* row = &K.m[std::size_t(i) * n];
                    double mx = neg_inf;
                    for (int j = 0; j < n; ++j) {
                        t[j] = line[j] + row[j];
                        if (t[j] > mx) mx = t[j];
                    }
                    if (mx == neg_inf) {
                        next[base + i * st] = neg_inf;
                        continue;
                    }
                    double s = 0;
                    const double floor = mx - cut;
                    for (int j = 0; j < n; ++j)
                        if (t[j] > floor) s += std::exp(t[j] - mx);
                    next[base + i * st] = mx + std::log(s);
                }
            }
        std::swap(cur, next);
    }
    return cur;
}

// out[i] = sum_j in[j] prod_a K_a(i_a, j_a) with plain weights, one axis at a time
inline std::vector<double> convolve(const GridSpec& g, const std::vector<double>& in,
                                    const std::vector<const std::vector<double>*>& ker) {
    const int n = g.n();
    std::vector<double> cur = in, next(in.size());
    std::vector<double> line(n);
    for (int a = 0; a < g.d(); ++a) {
        const std::vector<double>& K = *ker[a];
        const std::size_t st = g.stride(a);
        const std::size_t block = st * n;
        for (std::size_t outer = 0; outer < g.size(); outer += block)
            for (std::size_t inner = 0; inner < st; ++inner) {
                const std::size_t base = outer + inner;
                for (int j = 0; j < n; ++j) line[j] = cur[base + j * st];
                for (int i = 0; i < n; ++i) {
                    double s = 0;
                    for (int j = 0; j < n; ++j) s += K[std::size_t(i) * n + j] * line[j];
                    next[base + i * st] = s;
                }
            }
        std::swap(cur, next);
    }
    return cur;
}

}  // namespace chimera
