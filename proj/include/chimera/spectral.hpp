#pragma once

#include <fftw3.h>

#include <complex>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace chimera {

namespace detail {

inline int thread_cap() {
    const char* s = std::getenv("CHIMERA_THREADS");
    if (!s) return 1;
    int t = std::atoi(s);
    return t > 0 ? t : 1;
}

struct FftwBuf {
    void* p = nullptr;
    explicit FftwBuf(std::size_t bytes) : p(fftw_malloc(bytes)) {
        if (!p) throw Error("fftw_malloc failed");
    }
    ~FftwBuf() { fftw_free(p); }
    FftwBuf(const FftwBuf&) = delete;
    FftwBuf& operator=(const FftwBuf&) = delete;
};

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    ~PlanPair() {
        if (fwd) fftw_destroy_plan(fwd);
        if (inv) fftw_destroy_plan(inv);
    }
};

// Plans are made once per (d, n) with FFTW_ESTIMATE and run through the new-array API.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache c;
        return c;
    }

    const PlanPair& get(int d, int n) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_pair(d, n);
        auto it = plans_.find(key);
        if (it != plans_.end()) return *it->second;
        std::vector<int> dims(d, n);
        std::size_t nr = 1;
        for (int a = 0; a < d; ++a) nr *= n;
        std::size_t nc = nr / n * (n / 2 + 1);
        FftwBuf r(sizeof(double) * nr), c(sizeof(fftw_complex) * nc);
        auto pp = std::make_unique<PlanPair>();
        pp->fwd = fftw_plan_dft_r2c(d, dims.data(), (double*)r.p, (fftw_complex*)c.p, FFTW_ESTIMATE);
        pp->inv = fftw_plan_dft_c2r(d, dims.data(), (fftw_complex*)c.p, (double*)r.p,
                                    FFTW_ESTIMATE | FFTW_DESTROY_INPUT);
        if (!pp->fwd || !pp->inv) throw Error("fftw planning failed");
        auto& ref = *pp;
        plans_.emplace(key, std::move(pp));
        return ref;
    }

private:
    PlanCache() {
        fftw_init_threads();
        fftw_plan_with_nthreads(thread_cap());
    }
    ~PlanCache() {
        plans_.clear();
        fftw_cleanup_threads();
    }
    std::mutex mu_;
    std::map<std::pair<int, int>, std::unique_ptr<PlanPair>> plans_;
};

}  // namespace detail

// Half spectrum of a real field (last axis stores n/2+1 modes). Unnormalized forward DFT.
struct Spectrum {
    GridSpec grid;
    std::vector<std::complex<double>> c;

    std::size_t last_len() const { return std::size_t(grid.n() / 2 + 1); }

    // wavenumber for index j on an axis
    double k(int j) const {
        int n = grid.n();
        int jj = (2 * j <= n) ? j : j - n;
        return 2.0 * M_PI / grid.L() * jj;
    }
    bool nyquist(int j) const { return grid.n() % 2 == 0 && 2 * j == grid.n(); }

    // visit every stored mode with its integer index vector
    template <class Fn>
    void for_each_mode(Fn&& fn) {
        const int d = grid.d(), n = grid.n();
        const int nl = int(last_len());
        std::vector<int> j(d, 0);
        for (std::size_t idx = 0; idx < c.size(); ++idx) {
            fn(idx, j);
            for (int a = d - 1; a >= 0; --a) {
                int lim = (a == d - 1) ? nl : n;
                if (++j[a] < lim) break;
                j[a] = 0;
            }
        }
    }

    // multiplicity of a stored mode in the full spectrum
    double weight(const std::vector<int>& j) const {
        int jl = j.back();
        if (jl == 0 || (grid.n() % 2 == 0 && 2 * jl == grid.n())) return 1.0;
        return 2.0;
    }
};

inline Spectrum forward(const Field& f) {
    const auto& g = f.grid;
    const auto& pp = detail::PlanCache::instance().get(g.d(), g.n());
    Spectrum s{g, {}};
    std::size_t nc = g.size() / g.n() * (g.n() / 2 + 1);
    detail::FftwBuf r(sizeof(double) * g.size()), c(sizeof(fftw_complex) * nc);
    std::memcpy(r.p, f.values.data(), sizeof(double) * g.size());
    fftw_execute_dft_r2c(pp.fwd, (double*)r.p, (fftw_complex*)c.p);
    s.c.resize(nc);
    std::memcpy(s.c.data(), c.p, sizeof(fftw_complex) * nc);
    return s;
}

inline Field inverse(const Spectrum& s) {
    const auto& g = s.grid;
    const auto& pp = detail::PlanCache::instance().get(g.d(), g.n());
    std::size_t nc = s.c.size();
    detail::FftwBuf r(sizeof(double) * g.size()), c(sizeof(fftw_complex) * nc);
    std::memcpy(c.p, s.c.data(), sizeof(fftw_complex) * nc);
    fftw_execute_dft_c2r(pp.inv, (fftw_complex*)c.p, (double*)r.p);
    Field f(g);
    const double inv = 1.0 / double(g.size());
    const double* rp = (const double*)r.p;
    for (std::size_t i = 0; i < g.size(); ++i) f[i] = rp[i] * inv;
    return f;
}

// Multiply each mode by sym(k-vector, index-vector).
template <class Sym>
Field apply_symbol(const Field& f, Sym&& sym) {
    Spectrum s = forward(f);
    std::vector<double> kv(f.grid.d());
    s.for_each_mode([&](std::size_t idx, const std::vector<int>& j) {
        for (int a = 0; a < f.grid.d(); ++a) kv[a] = s.k(j[a]);
        s.c[idx] *= sym(kv, j);
    });
    return inverse(s);
}

inline double ksq(const std::vector<double>& k) {
    double s = 0;
    for (double x : k) s += x * x;
    return s;
}

inline Field gradient_axis(const Field& f, int a) {
    const int n = f.grid.n();
    return apply_symbol(f, [&](const std::vector<double>& k, const std::vector<int>& j) {
        // Nyquist mode has no real derivative
        if (n % 2 == 0 && 2 * j[a] == n) return std::complex<double>(0, 0);
        return std::complex<double>(0, k[a]);
    });
}

inline std::vector<Field> gradient(const Field& f) {
    std::vector<Field> out;
    for (int a = 0; a < f.grid.d(); ++a) out.push_back(gradient_axis(f, a));
    return out;
}

inline Field laplacian(const Field& f) {
    return apply_symbol(f, [](const std::vector<double>& k, const std::vector<int>&) {
        return std::complex<double>(-ksq(k), 0);
    });
}

inline Field divergence(const std::vector<Field>& F) {
    require(!F.empty(), "divergence: empty vector field");
    Field out(F[0].grid);
    for (std::size_t a = 0; a < F.size(); ++a) out += gradient_axis(F[a], int(a));
    return out;
}

// (alpha - kappa*Lap) f = rhs
inline Field helmholtz_solve(double alpha, double kappa, const Field& rhs) {
    require(alpha > 0, "helmholtz_solve: alpha must be positive");
    require(kappa > 0, "helmholtz_solve: kappa must be positive");
    return apply_symbol(rhs, [&](const std::vector<double>& k, const std::vector<int>&) {
        return std::complex<double>(1.0 / (alpha + kappa * ksq(k)), 0);
    });
}

// (alpha - kappa*Lap) f, the forward operator
inline Field helmholtz_apply(double alpha, double kappa, const Field& f) {
    Field out = laplacian(f);
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = alpha * f[i] - kappa * out[i];
    return out;
}

inline Field biharmonic_inverse(const Field& rhs) {
    double scale = 0;
    for (double x : rhs.values) scale = std::max(scale, std::abs(x));
    require(std::abs(rhs.mean()) <= 1e-12 * std::max(1.0, scale),
            "biharmonic_inverse: rhs must have zero mean");
    return apply_symbol(rhs, [](const std::vector<double>& k, const std::vector<int>& j) {
        double k2 = ksq(k);
        bool zero = true;
        for (int x : j) zero = zero && x == 0;
        if (zero) return std::complex<double>(0, 0);
        return std::complex<double>(1.0 / (k2 * k2), 0);
    });
}

// sum over the full spectrum of w(|k|^2)|F_k|^2, scaled so w=1 gives the discrete L2 norm squared
template <class W>
double spectral_energy(const Field& f, W&& w) {
    Spectrum s = forward(f);
    double acc = 0;
    std::vector<double> kv(f.grid.d());
    s.for_each_mode([&](std::size_t idx, const std::vector<int>& j) {
        for (int a = 0; a < f.grid.d(); ++a) kv[a] = s.k(j[a]);
        acc += s.weight(j) * w(ksq(kv)) * std::norm(s.c[idx]);
    });
    return acc * f.grid.cell_volume() / double(f.grid.size());
}

}  // namespace chimera
