#pragma once

// Limited-memory quasi-Newton minimizer with optional L1 handling in the
// orthant-wise (OWL-QN) style, so L1-penalized coordinates can land on
// exact zeros. The callback supplies the smooth part of the objective and
// its gradient; the L1 term is handled here.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "linkrot/errors.hpp"

namespace linkrot {

struct OptimOptions {
    int max_iters = 500;
    double tol_rel_obj = 1e-15;
    double tol_grad_inf = 1e-8;
    int history = 10;
};

struct OptimResult {
    std::vector<double> x;
    double f = 0.0;  // full objective (smooth + L1) at x
    int iters = 0;
    bool converged = false;
};

namespace detail_opt {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double inf_norm(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

}  // namespace detail_opt

/// Minimize f_smooth(x) + l1_weight * sum_{j in mask} |x_j|.
/// `eval` returns the smooth value and fills the smooth gradient.
inline OptimResult minimize(
    const std::function<double(const std::vector<double>&, std::vector<double>&)>& eval,
    std::vector<double> x, const OptimOptions& opts, double l1_weight = 0.0,
    const std::vector<std::uint8_t>& l1_mask = {}) {
    using detail_opt::dot;
    using detail_opt::inf_norm;

    const std::size_t n = x.size();
    const bool use_l1 = l1_weight > 0.0;
    if (use_l1 && l1_mask.size() != n) throw BadOptions("l1 mask size mismatch");

    auto l1_term = [&](const std::vector<double>& v) {
        if (!use_l1) return 0.0;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (l1_mask[j]) s += std::fabs(v[j]);
        }
        return l1_weight * s;
    };

    // Pseudo-gradient: the steepest-descent direction of the non-smooth
    // objective; zero at coordinates where 0 is locally optimal.
    auto pseudo_grad = [&](const std::vector<double>& xs, const std::vector<double>& g) {
        std::vector<double> pg = g;
        if (use_l1) {
            for (std::size_t j = 0; j < n; ++j) {
                if (!l1_mask[j]) continue;
                if (xs[j] > 0.0) {
                    pg[j] = g[j] + l1_weight;
                } else if (xs[j] < 0.0) {
                    pg[j] = g[j] - l1_weight;
                } else if (g[j] + l1_weight < 0.0) {
                    pg[j] = g[j] + l1_weight;
                } else if (g[j] - l1_weight > 0.0) {
                    pg[j] = g[j] - l1_weight;
                } else {
                    pg[j] = 0.0;
                }
            }
        }
        return pg;
    };

    std::vector<double> g(n);
    double f_smooth = eval(x, g);
    double f_full = f_smooth + l1_term(x);

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;

    OptimResult res;
    res.x = x;
    res.f = f_full;

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        std::vector<double> pg = pseudo_grad(x, g);
        if (inf_norm(pg) < opts.tol_grad_inf) {
            res.converged = true;
            break;
        }

        // Two-loop recursion for d = -H * pg.
        std::vector<double> d(n);
        for (std::size_t j = 0; j < n; ++j) d[j] = -pg[j];
        std::vector<double> alphas(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alphas[k] = rho_hist[k] * dot(s_hist[k], d);
            for (std::size_t j = 0; j < n; ++j) d[j] -= alphas[k] * y_hist[k][j];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        } else {
            const double gn = std::sqrt(dot(pg, pg));
            if (gn > 1.0) gamma = 1.0 / gn;
        }
        for (std::size_t j = 0; j < n; ++j) d[j] *= gamma;
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], d);
            for (std::size_t j = 0; j < n; ++j) d[j] += (alphas[k] - beta) * s_hist[k][j];
        }

        if (use_l1) {
            // Keep the direction in the descent orthant of the pseudo-gradient.
            for (std::size_t j = 0; j < n; ++j) {
                if (l1_mask[j] && d[j] * pg[j] >= 0.0) d[j] = 0.0;
            }
        } else if (dot(d, pg) >= 0.0) {
            for (std::size_t j = 0; j < n; ++j) d[j] = -pg[j];
        }

        // Orthant chosen for the L1 coordinates during the line search.
        std::vector<double> orthant;
        if (use_l1) {
            orthant.resize(n, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                if (!l1_mask[j]) continue;
                orthant[j] = x[j] != 0.0 ? (x[j] > 0.0 ? 1.0 : -1.0)
                                         : (pg[j] < 0.0 ? 1.0 : (pg[j] > 0.0 ? -1.0 : 0.0));
            }
        }

        // Backtracking line search on the full objective.
        const double c1 = 1e-4;
        double t = 1.0;
        bool accepted = false;
        std::vector<double> x_new(n), g_new(n);
        double f_new_full = f_full;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t j = 0; j < n; ++j) x_new[j] = x[j] + t * d[j];
            if (use_l1) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (l1_mask[j] && x_new[j] * orthant[j] < 0.0) x_new[j] = 0.0;
                }
            }
            const double f_new_smooth = eval(x_new, g_new);
            f_new_full = f_new_smooth + l1_term(x_new);
            std::vector<double> step(n);
            for (std::size_t j = 0; j < n; ++j) step[j] = x_new[j] - x[j];
            if (std::isfinite(f_new_full) && f_new_full <= f_full + c1 * dot(pg, step)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // no further progress representable

        std::vector<double> s_vec(n), y_vec(n);
        for (std::size_t j = 0; j < n; ++j) {
            s_vec[j] = x_new[j] - x[j];
            y_vec[j] = g_new[j] - g[j];
        }
        const double sy = dot(s_vec, y_vec);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s_vec));
            y_hist.push_back(std::move(y_vec));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.history) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        const double delta = f_full - f_new_full;
        x = x_new;
        g = g_new;
        f_full = f_new_full;
        res.iters = iter + 1;
        if (delta <= opts.tol_rel_obj * (std::fabs(f_full) + 1.0)) {
            res.converged = true;
            break;
        }
    }
    // Final gradient check covers the max_iters fall-through.
    if (!res.converged) {
        std::vector<double> pg = pseudo_grad(x, g);
        if (inf_norm(pg) < opts.tol_grad_inf) res.converged = true;
    }
    res.x = std::move(x);
    res.f = f_full;
    return res;
}

}  // namespace linkrot
