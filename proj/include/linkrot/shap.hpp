#pragma once

// Additive feature attributions comparable across the two models: the
// closed form for the linear model, and a permutation-sampling Shapley
// estimator for anything callable.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "linkrot/errors.hpp"

namespace linkrot {

struct ShapExplanation {
    double base_value = 0.0;
    std::vector<double> phi;
    std::vector<double> std_error;  // empty for the exact linear method
    std::string model_tag;
};

/// Exact attributions for a linear model: phi_j = beta_j (x_j - mean_j);
/// base + sum(phi) equals the prediction identically.
inline ShapExplanation shap_linear(const std::vector<double>& beta, double intercept,
                                   const std::vector<double>& x,
                                   const std::vector<double>& background_means) {
    if (x.size() != beta.size() || background_means.size() != beta.size()) {
        throw WidthMismatch("shap_linear width mismatch");
    }
    ShapExplanation e;
    e.model_tag = "tobit";
    e.base_value = intercept;
    for (std::size_t j = 0; j < beta.size(); ++j) {
        e.base_value += beta[j] * background_means[j];
        e.phi.push_back(beta[j] * (x[j] - background_means[j]));
    }
    return e;
}

/// Monte-Carlo permutation Shapley values. Each draw walks one random
/// feature ordering across the whole background set, so the efficiency
/// identity base + sum(phi) = predict(x) holds for every draw.
inline ShapExplanation shap_sampling(
    const std::function<double(const std::vector<double>&)>& predict_fn,
    const std::vector<double>& x, const std::vector<std::vector<double>>& background,
    int n_permutations, std::uint64_t seed, std::string model_tag = "sampling") {
    if (background.empty()) throw EmptyBackground();
    if (n_permutations < 1) throw BadOptions("n_permutations must be >= 1");
    const std::size_t p = x.size();
    for (const auto& z : background) {
        if (z.size() != p) throw WidthMismatch("background width mismatch");
    }
    const std::size_t n_bg = background.size();

    std::vector<double> base_preds(n_bg);
    double base = 0.0;
    for (std::size_t z = 0; z < n_bg; ++z) {
        base_preds[z] = predict_fn(background[z]);
        base += base_preds[z];
    }
    base /= static_cast<double>(n_bg);

    std::vector<std::vector<double>> per_perm(static_cast<std::size_t>(n_permutations),
                                              std::vector<double>(p, 0.0));
    std::vector<std::size_t> order(p);
    std::mt19937_64 rng(seed);
    for (int t = 0; t < n_permutations; ++t) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        auto& phi_t = per_perm[static_cast<std::size_t>(t)];
        for (std::size_t z = 0; z < n_bg; ++z) {
            std::vector<double> cur = background[z];
            double prev = base_preds[z];
            for (std::size_t j : order) {
                cur[j] = x[j];
                const double next = predict_fn(cur);
                phi_t[j] += next - prev;
                prev = next;
            }
        }
        for (double& v : phi_t) v /= static_cast<double>(n_bg);
    }

    ShapExplanation e;
    e.model_tag = std::move(model_tag);
    e.base_value = base;
    e.phi.assign(p, 0.0);
    e.std_error.assign(p, 0.0);
    for (const auto& phi_t : per_perm) {
        for (std::size_t j = 0; j < p; ++j) e.phi[j] += phi_t[j];
    }
    const double nt = static_cast<double>(n_permutations);
    for (std::size_t j = 0; j < p; ++j) e.phi[j] /= nt;
    if (n_permutations > 1) {
        for (std::size_t j = 0; j < p; ++j) {
            double ss = 0.0;
            for (const auto& phi_t : per_perm) {
                ss += (phi_t[j] - e.phi[j]) * (phi_t[j] - e.phi[j]);
            }
            e.std_error[j] = std::sqrt(ss / (nt * (nt - 1.0)));
        }
    }
    return e;
}

/// Global ranking signal: mean |phi_j| over an evaluation set.
inline std::vector<double> mean_abs_shap(const std::vector<ShapExplanation>& explanations) {
    if (explanations.empty()) throw BadOptions("no explanations");
    const std::size_t p = explanations.front().phi.size();
    std::vector<double> out(p, 0.0);
    for (const auto& e : explanations) {
        if (e.phi.size() != p) throw WidthMismatch("explanation width mismatch");
        for (std::size_t j = 0; j < p; ++j) out[j] += std::fabs(e.phi[j]);
    }
    for (double& v : out) v /= static_cast<double>(explanations.size());
    return out;
}

}  // namespace linkrot
