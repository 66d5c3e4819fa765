#pragma once

// Censored (Tobit) regression with an elastic-net prior, fit by MAP over
// (beta, log sigma). Left and right censor bounds are both supported even
// though the link-rot pipeline only right-censors.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "linkrot/dataset.hpp"
#include "linkrot/errors.hpp"
#include "linkrot/optimize.hpp"
#include "linkrot/stats.hpp"

namespace linkrot {

struct CensoredObservation {
    std::vector<double> x;
    double y = 0.0;
    double a = -std::numeric_limits<double>::infinity();
    double b = std::numeric_limits<double>::infinity();
    int left_censored = 0;   // I^a
    int right_censored = 0;  // I^b
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Censored log-likelihood: Phi tail mass at the bound for censored rows,
/// normal density for interior rows.
inline double log_likelihood(const std::vector<CensoredObservation>& data,
                             const std::vector<double>& beta, double sigma) {
    if (sigma <= 0.0) throw NonPositiveSigma();
    double ll = 0.0;
    for (const auto& obs : data) {
        const double xb = dot(obs.x, beta);
        if (obs.left_censored) {
            ll += norm_log_cdf((obs.a - xb) / sigma);
        } else if (obs.right_censored) {
            ll += norm_log_cdf((xb - obs.b) / sigma);
        } else {
            ll += norm_log_pdf((obs.y - xb) / sigma) - std::log(sigma);
        }
    }
    return ll;
}

/// Elastic-net log-prior with unit Gaussian/Laplace scales and additive
/// constants dropped: -lambda(1-alpha)/2 ||beta||^2 - lambda*alpha ||beta||_1.
inline double log_prior(const std::vector<double>& beta, double lambda, double alpha) {
    if (lambda < 0.0 || alpha < 0.0 || alpha > 1.0) throw BadHyperparameter();
    double l2 = 0.0, l1 = 0.0;
    for (double bj : beta) {
        l2 += bj * bj;
        l1 += std::fabs(bj);
    }
    return -lambda * (1.0 - alpha) * 0.5 * l2 - lambda * alpha * l1;
}

struct TobitGradient {
    std::vector<double> beta;
    double log_sigma = 0.0;
};

/// Analytic likelihood gradient wrt (beta, log sigma).
inline TobitGradient grad_log_likelihood(const std::vector<CensoredObservation>& data,
                                         const std::vector<double>& beta, double log_sigma) {
    const double sigma = std::exp(log_sigma);
    if (sigma <= 0.0 || !std::isfinite(sigma)) throw NonPositiveSigma();
    TobitGradient g;
    g.beta.assign(beta.size(), 0.0);
    for (const auto& obs : data) {
        const double xb = dot(obs.x, beta);
        if (obs.left_censored) {
            const double z = (obs.a - xb) / sigma;
            const double m = inv_mills(z);
            for (std::size_t j = 0; j < beta.size(); ++j) g.beta[j] += -m / sigma * obs.x[j];
            g.log_sigma += -m * z;
        } else if (obs.right_censored) {
            const double z = (xb - obs.b) / sigma;
            const double m = inv_mills(z);
            for (std::size_t j = 0; j < beta.size(); ++j) g.beta[j] += m / sigma * obs.x[j];
            g.log_sigma += -m * z;
        } else {
            const double r = (obs.y - xb) / sigma;
            for (std::size_t j = 0; j < beta.size(); ++j) g.beta[j] += r / sigma * obs.x[j];
            g.log_sigma += r * r - 1.0;
        }
    }
    return g;
}

/// Gradient of log-likelihood + log-prior, the subgradient convention
/// sign(0) = 0 applied to the L1 part. Every coordinate of beta is
/// penalized here; fit_map handles intercept exclusion itself.
inline TobitGradient grad_log_posterior(const std::vector<CensoredObservation>& data,
                                        const std::vector<double>& beta, double log_sigma,
                                        double lambda, double alpha) {
    if (lambda < 0.0 || alpha < 0.0 || alpha > 1.0) throw BadHyperparameter();
    TobitGradient g = grad_log_likelihood(data, beta, log_sigma);
    for (std::size_t j = 0; j < beta.size(); ++j) {
        const double sgn = beta[j] > 0.0 ? 1.0 : (beta[j] < 0.0 ? -1.0 : 0.0);
        g.beta[j] += -lambda * (1.0 - alpha) * beta[j] - lambda * alpha * sgn;
    }
    return g;
}

struct FitDiagnostics {
    double log_posterior = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Coefficients in the raw (vector) form used by the fitting core.
struct TobitFit {
    std::vector<double> beta;
    double intercept = 0.0;
    double sigma = 1.0;
    double lambda = 0.0;
    double alpha = 0.5;
    FitDiagnostics diagnostics;

    double predict(const std::vector<double>& x) const {
        if (x.size() != beta.size()) throw WidthMismatch("predict width mismatch");
        return intercept + dot(x, beta);
    }
};

struct FitOptions {
    OptimOptions optim;
    bool throw_on_nonconvergence = true;
    // Warm start: [beta..., intercept, log sigma]; must be p+2 long.
    std::optional<std::vector<double>> init_theta;
};

/// MAP fit over (beta, intercept, log sigma). The intercept and log sigma
/// are never penalized. L1 coordinates are handled orthant-wise so they
/// can be exactly zero at the solution.
inline TobitFit fit_map(const std::vector<CensoredObservation>& data, double lambda, double alpha,
                        const FitOptions& opts = {}) {
    if (lambda < 0.0 || alpha < 0.0 || alpha > 1.0) throw BadHyperparameter();
    if (data.empty()) throw DegenerateDesign("no observations");
    const std::size_t p = data.front().x.size();
    for (const auto& obs : data) {
        if (obs.x.size() != p) throw WidthMismatch("inconsistent observation width");
    }
    if (data.size() < p + 2) throw DegenerateDesign("need at least p+2 observations");

    std::vector<double> interior_y;
    for (const auto& obs : data) {
        if (!obs.left_censored && !obs.right_censored) interior_y.push_back(obs.y);
    }
    if (interior_y.empty()) {
        throw DegenerateDesign("all observations censored; sigma unidentified");
    }

    const double y0 = mean(interior_y);
    double s0 = stddev_n(interior_y);
    if (s0 <= 1e-8) s0 = 1.0;

    // theta = [beta_0..beta_{p-1}, intercept, log sigma]
    std::vector<double> theta(p + 2, 0.0);
    theta[p] = y0;
    theta[p + 1] = std::log(s0);
    if (opts.init_theta) {
        if (opts.init_theta->size() != p + 2) throw WidthMismatch("init_theta width");
        theta = *opts.init_theta;
    } else if (lambda > 0.0 && p > 0) {
        // Warm-start penalized fits at the null model so that lambda at or
        // above the null-gradient threshold keeps every coefficient at its
        // stationary zero instead of escaping to a distant basin (the joint
        // objective over (beta, log sigma) is not convex).
        std::vector<CensoredObservation> null_data = data;
        for (auto& obs : null_data) obs.x.clear();
        const TobitFit null_fit = fit_map(null_data, 0.0, 0.0, opts);
        theta[p] = null_fit.intercept;
        theta[p + 1] = std::log(null_fit.sigma);
    }

    const double ridge = lambda * (1.0 - alpha);
    auto eval = [&](const std::vector<double>& th, std::vector<double>& grad) {
        std::vector<double> beta(th.begin(), th.begin() + static_cast<std::ptrdiff_t>(p));
        const double intercept = th[p];
        const double log_sigma = th[p + 1];
        const double sigma = std::exp(log_sigma);
        if (!std::isfinite(sigma) || sigma <= 0.0) {
            return std::numeric_limits<double>::infinity();
        }

        double ll = 0.0;
        std::vector<double> gb(p, 0.0);
        double gi = 0.0, gls = 0.0;
        for (const auto& obs : data) {
            const double xb = intercept + dot(obs.x, beta);
            if (obs.left_censored) {
                const double z = (obs.a - xb) / sigma;
                ll += norm_log_cdf(z);
                const double m = inv_mills(z);
                const double c = -m / sigma;
                for (std::size_t j = 0; j < p; ++j) gb[j] += c * obs.x[j];
                gi += c;
                gls += -m * z;
            } else if (obs.right_censored) {
                const double z = (xb - obs.b) / sigma;
                ll += norm_log_cdf(z);
                const double m = inv_mills(z);
                const double c = m / sigma;
                for (std::size_t j = 0; j < p; ++j) gb[j] += c * obs.x[j];
                gi += c;
                gls += -m * z;
            } else {
                const double r = (obs.y - xb) / sigma;
                ll += norm_log_pdf(r) - log_sigma;
                const double c = r / sigma;
                for (std::size_t j = 0; j < p; ++j) gb[j] += c * obs.x[j];
                gi += c;
                gls += r * r - 1.0;
            }
        }
        double obj = -ll;
        for (std::size_t j = 0; j < p; ++j) {
            obj += 0.5 * ridge * beta[j] * beta[j];
            grad[j] = -gb[j] + ridge * beta[j];
        }
        grad[p] = -gi;
        grad[p + 1] = -gls;
        return obj;  // L1 part lives in the optimizer
    };

    std::vector<std::uint8_t> l1_mask(p + 2, 0);
    for (std::size_t j = 0; j < p; ++j) l1_mask[j] = 1;
    OptimResult r = minimize(eval, theta, opts.optim, lambda * alpha, l1_mask);

    TobitFit fit;
    fit.beta.assign(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(p));
    fit.intercept = r.x[p];
    fit.sigma = std::exp(r.x[p + 1]);
    fit.lambda = lambda;
    fit.alpha = alpha;
    fit.diagnostics.log_posterior = -r.f;
    fit.diagnostics.iterations = r.iters;
    fit.diagnostics.converged = r.converged;
    if (!r.converged && opts.throw_on_nonconvergence) {
        throw DidNotConverge("tobit fit stopped after " + std::to_string(r.iters) +
                             " iterations, log-posterior " + format_double(-r.f));
    }
    return fit;
}

inline double log_likelihood_of_fit(const TobitFit& fit,
                                    const std::vector<CensoredObservation>& data) {
    double ll = 0.0;
    const double sigma = fit.sigma;
    for (const auto& obs : data) {
        const double xb = fit.intercept + dot(obs.x, fit.beta);
        if (obs.left_censored) {
            ll += norm_log_cdf((obs.a - xb) / sigma);
        } else if (obs.right_censored) {
            ll += norm_log_cdf((xb - obs.b) / sigma);
        } else {
            ll += norm_log_pdf((obs.y - xb) / sigma) - std::log(sigma);
        }
    }
    return ll;
}

/// 1 - ll_model / ll_null with the null an intercept-plus-sigma Tobit fit
/// on the same censored data.
inline double pseudo_r2(const TobitFit& fit, const std::vector<CensoredObservation>& data) {
    std::vector<CensoredObservation> null_data = data;
    for (auto& obs : null_data) obs.x.clear();
    TobitFit null_fit;
    try {
        null_fit = fit_map(null_data, 0.0, 0.0);
    } catch (const Error& e) {
        throw NullFitFailed(std::string("null model fit failed: ") + e.what());
    }
    const double ll_null = log_likelihood_of_fit(null_fit, null_data);
    if (ll_null == 0.0 || !std::isfinite(ll_null)) {
        throw NullFitFailed("null log-likelihood unusable");
    }
    const double ll_model = log_likelihood_of_fit(fit, data);
    return 1.0 - ll_model / ll_null;
}

struct CoefficientInterval {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool point_outside = false;  // skewed resamples can push the point out
};

struct BootstrapSummary {
    std::vector<CoefficientInterval> beta;  // per feature
    CoefficientInterval intercept;
    CoefficientInterval sigma;
    int replicates_requested = 0;
    int replicates_failed = 0;
};

namespace detail_tobit {

inline double percentile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - std::floor(pos);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

inline CoefficientInterval make_interval(double point, std::vector<double> draws) {
    CoefficientInterval ci;
    ci.point = point;
    ci.lo = percentile(draws, 0.025);
    ci.hi = percentile(std::move(draws), 0.975);
    ci.point_outside = point < ci.lo || point > ci.hi;
    return ci;
}

template <typename Fn>
inline void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail_tobit

/// Nonparametric bootstrap: resample rows with replacement, refit, take
/// percentile 95% intervals. Replicates run in parallel with per-replicate
/// seeds, so results are independent of scheduling.
inline BootstrapSummary bootstrap_fit(const std::vector<CensoredObservation>& data, double lambda,
                                      double alpha, int B, std::uint64_t seed,
                                      const FitOptions& opts = {}) {
    if (B < 1) throw BadOptions("B must be >= 1");
    const TobitFit full = fit_map(data, lambda, alpha, opts);
    const std::size_t n = data.size();
    const std::size_t p = full.beta.size();

    std::vector<std::optional<TobitFit>> fits(static_cast<std::size_t>(B));
    FitOptions rep_opts = opts;
    rep_opts.throw_on_nonconvergence = true;
    detail_tobit::parallel_for(static_cast<std::size_t>(B), [&](std::size_t rep) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(rep)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<CensoredObservation> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i) sample.push_back(data[pick(rng)]);
        try {
            fits[rep] = fit_map(sample, lambda, alpha, rep_opts);
        } catch (const Error&) {
            fits[rep] = std::nullopt;
        }
    });

    BootstrapSummary summary;
    summary.replicates_requested = B;
    std::vector<std::vector<double>> beta_draws(p);
    std::vector<double> intercept_draws, sigma_draws;
    for (const auto& f : fits) {
        if (!f) {
            ++summary.replicates_failed;
            continue;
        }
        for (std::size_t j = 0; j < p; ++j) beta_draws[j].push_back(f->beta[j]);
        intercept_draws.push_back(f->intercept);
        sigma_draws.push_back(f->sigma);
    }
    if (summary.replicates_failed > B / 5) {
        throw TooManyFailures(std::to_string(summary.replicates_failed) + " of " +
                              std::to_string(B) + " bootstrap replicates failed");
    }
    for (std::size_t j = 0; j < p; ++j) {
        summary.beta.push_back(detail_tobit::make_interval(full.beta[j], beta_draws[j]));
    }
    summary.intercept = detail_tobit::make_interval(full.intercept, intercept_draws);
    summary.sigma = detail_tobit::make_interval(full.sigma, sigma_draws);
    return summary;
}

struct RegPath {
    std::vector<double> lambda_grid;               // strictly decreasing
    std::vector<std::vector<double>> coefficients; // one beta row per grid point
    std::vector<double> intercepts;
    std::vector<double> sigmas;
    double alpha = 0.5;
};

/// Fit along a descending lambda grid, warm-starting each solve from the
/// previous solution. Fit errors are annotated with the offending lambda.
inline RegPath regularization_path(const std::vector<CensoredObservation>& data,
                                   const std::vector<double>& lambda_grid, double alpha,
                                   const FitOptions& opts = {}) {
    if (lambda_grid.empty()) throw BadOptions("empty lambda grid");
    for (std::size_t i = 0; i + 1 < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > lambda_grid[i + 1])) {
            throw BadOptions("lambda grid must be strictly decreasing");
        }
    }
    if (lambda_grid.back() < 0.0) throw BadOptions("lambda must be >= 0");

    RegPath path;
    path.lambda_grid = lambda_grid;
    path.alpha = alpha;
    FitOptions step_opts = opts;
    for (double lambda : lambda_grid) {
        try {
            TobitFit fit = fit_map(data, lambda, alpha, step_opts);
            std::vector<double> warm = fit.beta;
            warm.push_back(fit.intercept);
            warm.push_back(std::log(fit.sigma));
            step_opts.init_theta = std::move(warm);
            path.coefficients.push_back(fit.beta);
            path.intercepts.push_back(fit.intercept);
            path.sigmas.push_back(fit.sigma);
        } catch (const Error& e) {
            throw DidNotConverge("regularization path failed at lambda=" +
                                 format_double(lambda) + ": " + e.what());
        }
    }
    return path;
}

/// Empirical threshold above which an alpha=1 penalty zeroes every
/// coefficient: max_j |d loglik / d beta_j| at the null fit.
inline double null_gradient_threshold(const std::vector<CensoredObservation>& data) {
    std::vector<CensoredObservation> null_data = data;
    for (auto& obs : null_data) obs.x.clear();
    const TobitFit null_fit = fit_map(null_data, 0.0, 0.0);
    std::vector<double> beta(data.front().x.size(), 0.0);
    // Absorb the null intercept into the bounds/targets.
    std::vector<CensoredObservation> centered = data;
    for (auto& obs : centered) {
        obs.y -= null_fit.intercept;
        if (std::isfinite(obs.a)) obs.a -= null_fit.intercept;
        if (std::isfinite(obs.b)) obs.b -= null_fit.intercept;
    }
    const TobitGradient g =
        grad_log_likelihood(centered, beta, std::log(null_fit.sigma));
    double m = 0.0;
    for (double v : g.beta) m = std::max(m, std::fabs(v));
    return m;
}

inline std::vector<double> default_lambda_grid(const std::vector<CensoredObservation>& data,
                                               double alpha, int points = 20) {
    const double threshold = null_gradient_threshold(data);
    const double lambda_max = threshold / std::max(alpha, 0.05) * 1.1;
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    const double lambda_min = lambda_max * 1e-4;
    for (int i = 0; i < points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(points - 1);
        grid.push_back(lambda_max * std::pow(lambda_min / lambda_max, t));
    }
    return grid;
}

/// Pick lambda by k-fold CV on held-out censored log-likelihood.
inline double cv_select_lambda(const std::vector<CensoredObservation>& data, double alpha, int k,
                               std::uint64_t seed, const FitOptions& opts = {}) {
    const auto grid = default_lambda_grid(data, alpha);
    const auto folds = kfold(data.size(), k, seed);
    double best_lambda = grid.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double score = 0.0;
        bool ok = true;
        for (const auto& fold : folds) {
            std::vector<bool> held(data.size(), false);
            for (auto i : fold) held[i] = true;
            std::vector<CensoredObservation> train, test;
            for (std::size_t i = 0; i < data.size(); ++i) {
                (held[i] ? test : train).push_back(data[i]);
            }
            try {
                const TobitFit fit = fit_map(train, lambda, alpha, opts);
                score += log_likelihood_of_fit(fit, test);
            } catch (const Error&) {
                ok = false;
                break;
            }
        }
        if (ok && score > best_score) {
            best_score = score;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

// Named model with standardization, the persisted form ---------------------

struct TobitModel {
    std::vector<std::string> manifest;
    TobitFit fit;
    Standardization standardization;

    /// Latent linear predictor for a raw (unstandardized) feature row.
    double predict(const std::vector<double>& raw) const {
        return fit.predict(standardization.apply(raw));
    }

    nlohmann::json to_json() const {
        nlohmann::json beta = nlohmann::json::object();
        for (std::size_t j = 0; j < manifest.size(); ++j) beta[manifest[j]] = fit.beta[j];
        return nlohmann::json{
            {"model_type", "tobit"},
            {"manifest", manifest},
            {"intercept", fit.intercept},
            {"beta", beta},
            {"sigma", fit.sigma},
            {"lambda", fit.lambda},
            {"alpha", fit.alpha},
            {"standardization",
             {{"mean", standardization.mean}, {"sd", standardization.sd}}},
            {"diagnostics",
             {{"log_posterior", fit.diagnostics.log_posterior},
              {"iterations", fit.diagnostics.iterations},
              {"converged", fit.diagnostics.converged}}}};
    }

    static TobitModel from_json(const nlohmann::json& j) {
        TobitModel m;
        m.manifest = j.at("manifest").get<std::vector<std::string>>();
        m.fit.intercept = j.at("intercept").get<double>();
        m.fit.sigma = j.at("sigma").get<double>();
        m.fit.lambda = j.at("lambda").get<double>();
        m.fit.alpha = j.at("alpha").get<double>();
        for (const auto& name : m.manifest) {
            m.fit.beta.push_back(j.at("beta").at(name).get<double>());
        }
        m.standardization.mean = j.at("standardization").at("mean").get<std::vector<double>>();
        m.standardization.sd = j.at("standardization").at("sd").get<std::vector<double>>();
        const auto& d = j.at("diagnostics");
        m.fit.diagnostics.log_posterior = d.at("log_posterior").get<double>();
        m.fit.diagnostics.iterations = d.at("iterations").get<int>();
        m.fit.diagnostics.converged = d.at("converged").get<bool>();
        return m;
    }
};

/// Build censored observations from a standardized dataset: alive rows are
/// right-censored at their bound, dead rows are interior.
inline std::vector<CensoredObservation> observations_from_dataset(const Dataset& d) {
    std::vector<CensoredObservation> obs;
    obs.reserve(d.n_rows());
    for (std::size_t i = 0; i < d.n_rows(); ++i) {
        CensoredObservation o;
        o.x = d.x[i];
        o.y = d.outcomes[i].scaled_y;
        if (d.outcomes[i].censor_bound_b) {
            o.b = *d.outcomes[i].censor_bound_b;
            o.right_censored = 1;
        }
        obs.push_back(std::move(o));
    }
    return obs;
}

inline TobitModel fit_tobit_model(const Dataset& raw, double lambda, double alpha,
                                  const FitOptions& opts = {}) {
    auto [std_data, standardization] = standardize(raw);
    TobitModel m;
    m.manifest = raw.manifest;
    m.standardization = standardization;
    m.fit = fit_map(observations_from_dataset(std_data), lambda, alpha, opts);
    return m;
}

}  // namespace linkrot
