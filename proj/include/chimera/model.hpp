#pragma once

#include <cmath>
#include <string>

#include "error.hpp"

namespace chimera {

enum class Regime { subcritical, critical, unsupported };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::subcritical: return "subcritical";
        case Regime::critical: return "critical";
        default: return "unsupported-by-theory";
    }
}

struct ModelParams {
    double m = 2.0;
    double eps1 = 1, eps2 = 1;
    double kap1 = 1, kap2 = 1;
    double gam1 = 0, gam2 = 0;
    double tau = 0.1;
    double M = 1.0;
    int d = 1;

    void validate() const {
        require(m > 1, "model: m must exceed 1");
        require(eps1 > 0 && eps2 > 0, "model: eps1 and eps2 must be positive");
        require(kap1 > 0 && kap2 > 0, "model: kap1 and kap2 must be positive");
        require(gam1 >= 0 && gam2 >= 0, "model: gam1 and gam2 must be nonnegative");
        require(tau > 0, "model: tau must be positive");
        require(M > 0, "model: mass must be positive");
        require(d >= 1, "model: dimension must be positive");
    }

    // compares m with 2 - 4/d; the equality test is done in integers, m*d == 2d - 4
    Regime regime() const {
        double lhs = m * d, rhs = 2.0 * d - 4.0;
        if (std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs) + 1e-15) return Regime::critical;
        return lhs > rhs ? Regime::subcritical : Regime::unsupported;
    }

    // theory is stated for d >= 5
    bool inside_theorem_dimensions() const { return d >= 5; }
};

}  // namespace chimera
