#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "grid.hpp"

namespace chimera {

struct PlanEntry {
    std::size_t i, j;
    double mass;
};

struct ExactPlan {
    std::vector<PlanEntry> support;
    double cost = 0;  // sum mass_ij |x_i - y_j|^2, mass units
    double w2 = 0;
    int pivots = 0;
};

namespace detail {

// Transportation simplex on a dense bipartite graph. Spanning-tree basis from the northwest corner,
// block pricing, Bland's rule after a long run of degenerate pivots.
class TransportSimplex {
public:
    TransportSimplex(std::vector<double> a, std::vector<double> b, std::vector<double> cost)
        : S_(int(a.size())), T_(int(b.size())), a_(std::move(a)), b_(std::move(b)), c_(std::move(cost)) {}

    void solve(int max_pivots) {
        init_basis();
        compute_potentials();
        double cmax = 0;
        for (double x : c_) cmax = std::max(cmax, std::abs(x));
        const double tol = 1e-13 * std::max(cmax, 1e-300);
        const std::size_t narcs = std::size_t(S_) * T_;
        const std::size_t block = std::max<std::size_t>(64, std::size_t(std::sqrt(double(narcs))));
        std::size_t cursor = 0;
        int degenerate_run = 0;
        for (pivots_ = 0; pivots_ < max_pivots; ++pivots_) {
            std::size_t enter = narcs;
            if (degenerate_run > 50) {
                for (std::size_t e = 0; e < narcs; ++e)
                    if (reduced(e) < -tol) {
                        enter = e;
                        break;
                    }
            } else {
                double best = -tol;
                std::size_t scanned = 0;
                while (scanned < narcs) {
                    std::size_t lim = std::min(narcs - scanned, block);
                    for (std::size_t t = 0; t < lim; ++t) {
                        std::size_t e = (cursor + t) % narcs;
                        double rc = reduced(e);
                        if (rc < best) {
                            best = rc;
                            enter = e;
                        }
                    }
                    cursor = (cursor + lim) % narcs;
                    scanned += lim;
                    if (enter != narcs) break;
                }
            }
            if (enter == narcs) return;
            bool deg = pivot(int(enter / T_), int(enter % T_));
            degenerate_run = deg ? degenerate_run + 1 : 0;
            compute_potentials();
        }
        throw Error("lp_exact_w2: pivot limit reached");
    }

    // flows recomputed from the tree by peeling leaves, which keeps marginals tight
    std::vector<PlanEntry> plan() {
        std::vector<double> ra = a_, rb = b_;
        std::vector<std::vector<int>> adj = adj_;
        std::vector<int> deg(S_ + T_);
        for (int v = 0; v < S_ + T_; ++v) deg[v] = int(adj[v].size());
        std::vector<int> stack;
        for (int v = 0; v < S_ + T_; ++v)
            if (deg[v] == 1) stack.push_back(v);
        std::vector<char> done(S_ + T_, 0);
        std::vector<PlanEntry> out;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            if (done[v] || deg[v] != 1) continue;
            int w = -1;
            for (int x : adj[v])
                if (!done[x]) w = x;
            if (w < 0) continue;
            double amt = v < S_ ? ra[v] : rb[v - S_];
            amt = std::max(amt, 0.0);
            int i = v < S_ ? v : w, j = v < S_ ? w - S_ : v - S_;
            if (amt > 0) out.push_back({std::size_t(i), std::size_t(j), amt});
            if (w < S_) ra[w] -= amt;
            else rb[w - S_] -= amt;
            done[v] = 1;
            if (--deg[w] == 1) stack.push_back(w);
        }
        return out;
    }

    int pivots() const { return pivots_; }

private:
    double reduced(std::size_t e) const { return c_[e] - u_[e / T_] - v_[e % T_]; }

    void add_edge(int i, int j, double x) {
        adj_[i].push_back(S_ + j);
        adj_[S_ + j].push_back(i);
        flow_[std::size_t(i) * T_ + j] = x;
    }
    void remove_edge(int i, int j) {
        auto& A = adj_[i];
        A.erase(std::find(A.begin(), A.end(), S_ + j));
        auto& B = adj_[S_ + j];
        B.erase(std::find(B.begin(), B.end(), i));
        flow_[std::size_t(i) * T_ + j] = 0;
    }

    void init_basis() {
        adj_.assign(S_ + T_, {});
        flow_.assign(std::size_t(S_) * T_, 0.0);
        std::vector<double> ra = a_, rb = b_;
        int i = 0, j = 0;
        while (true) {
            double x = std::min(ra[i], rb[j]);
            add_edge(i, j, std::max(x, 0.0));
            ra[i] -= x;
            rb[j] -= x;
            if (i == S_ - 1 && j == T_ - 1) break;
            if (j == T_ - 1 || (i < S_ - 1 && ra[i] <= rb[j])) ++i;
            else ++j;
        }
    }

    void compute_potentials() {
        u_.assign(S_, 0.0);
        v_.assign(T_, 0.0);
        std::vector<char> seen(S_ + T_, 0);
        std::vector<int> q{0};
        seen[0] = 1;
        for (std::size_t h = 0; h < q.size(); ++h) {
            int x = q[h];
            for (int y : adj_[x]) {
                if (seen[y]) continue;
                seen[y] = 1;
                if (x < S_) v_[y - S_] = c_[std::size_t(x) * T_ + (y - S_)] - u_[x];
                else u_[y] = c_[std::size_t(y) * T_ + (x - S_)] - v_[x - S_];
                q.push_back(y);
            }
        }
    }

    // returns true if the pivot moved zero flow
    bool pivot(int ei, int ej) {
        // tree path from column node ej to row node ei
        const int src = S_ + ej, dst = ei;
        std::vector<int> parent(S_ + T_, -2);
        std::vector<int> q{src};
        parent[src] = -1;
        for (std::size_t h = 0; h < q.size() && parent[dst] == -2; ++h)
            for (int y : adj_[q[h]])
                if (parent[y] == -2) {
                    parent[y] = q[h];
                    q.push_back(y);
                }
        std::vector<int> path;
        for (int x = dst; x != -1; x = parent[x]) path.push_back(x);
        std::reverse(path.begin(), path.end());  // src ... dst
        // edges along the path alternate minus, plus, minus, ...
        double theta = std::numeric_limits<double>::infinity();
        int li = -1, lj = -1;
        for (std::size_t k = 0; k + 1 < path.size(); k += 2) {
            int col = path[k] - S_, row = path[k + 1];
            double f = flow_[std::size_t(row) * T_ + col];
            if (f < theta) {
                theta = f;
                li = row;
                lj = col;
            }
        }
        theta = std::max(theta, 0.0);
        for (std::size_t k = 0; k + 1 < path.size(); ++k) {
            int x = path[k], y = path[k + 1];
            int row = x < S_ ? x : y, col = (x < S_ ? y : x) - S_;
            double& f = flow_[std::size_t(row) * T_ + col];
            f += (k % 2 == 0) ? -theta : theta;
        }
        remove_edge(li, lj);
        add_edge(ei, ej, theta);
        return theta == 0.0;
    }

    int S_, T_;
    std::vector<double> a_, b_, c_;
    std::vector<std::vector<int>> adj_;
    std::vector<double> flow_;
    std::vector<double> u_, v_;
    int pivots_ = 0;
};

}  // namespace detail

// Exact W2 by linear programming over cells with positive mass; torus cost.
inline ExactPlan lp_exact_w2(const DensityView& mu, const DensityView& nu, std::size_t cell_cap = 4096) {
    require(mu.grid() == nu.grid(), "lp_exact_w2: grid mismatch");
    const GridSpec& g = mu.grid();
    require(g.size() <= cell_cap, "lp_exact_w2: instance too large for the exact solver");
    require(std::abs(mu.mass() - nu.mass()) <= 1e-8 * mu.mass(), "lp_exact_w2: mass mismatch");
    const double hd = g.cell_volume();
    std::vector<std::size_t> si, sj;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (mu[i] > 0) {
            si.push_back(i);
            a.push_back(mu[i] * hd);
        }
    for (std::size_t j = 0; j < g.size(); ++j)
        if (nu[j] > 0) {
            sj.push_back(j);
            b.push_back(nu[j] * hd);
        }
    // absorb rounding so both sides carry the same total
    double sa = 0, sb = 0;
    for (double x : a) sa += x;
    for (double x : b) sb += x;
    for (double& x : b) x *= sa / sb;
    std::vector<double> c(si.size() * sj.size());
    for (std::size_t p = 0; p < si.size(); ++p)
        for (std::size_t q = 0; q < sj.size(); ++q) {
            double s = 0;
            for (int ax = 0; ax < g.d(); ++ax) {
                double dx = g.wrap((g.index_on_axis(si[p], ax) - g.index_on_axis(sj[q], ax)) * g.h());
                s += dx * dx;
            }
            c[p * sj.size() + q] = s;
        }
    detail::TransportSimplex ts(a, b, c);
    ts.solve(int(50 * (si.size() + sj.size()) + 1000));
    ExactPlan out;
    out.pivots = ts.pivots();
    for (auto e : ts.plan()) {
        out.cost += e.mass * c[e.i * sj.size() + e.j];
        out.support.push_back({si[e.i], sj[e.j], e.mass});
    }
    out.w2 = std::sqrt(std::max(0.0, out.cost));
    return out;
}

}  // namespace chimera
