#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "linkrot/tobit.hpp"

using namespace linkrot;

namespace {

struct Sim {
    std::vector<CensoredObservation> data;
    std::vector<double> beta_true;
    double intercept_true = 0.0;
    double sigma_true = 1.0;
};

// Latent linear outcome; a fraction of rows right-censored at a common bound.
Sim simulate(std::size_t n, std::size_t p, double censor_quantile, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Sim s;
    s.beta_true.resize(p);
    for (auto& b : s.beta_true) b = nd(rng);
    s.intercept_true = nd(rng);
    s.sigma_true = 0.5 + std::abs(nd(rng));

    std::vector<double> latent(n);
    s.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& o = s.data[i];
        o.x.resize(p);
        for (auto& v : o.x) v = nd(rng);
        latent[i] = s.intercept_true + dot(o.x, s.beta_true) + s.sigma_true * nd(rng);
        o.y = latent[i];
    }
    if (censor_quantile > 0.0) {
        std::vector<double> sorted = latent;
        std::sort(sorted.begin(), sorted.end());
        const double bound = sorted[static_cast<std::size_t>(
            censor_quantile * static_cast<double>(n - 1))];
        for (auto& o : s.data) {
            if (o.y > bound) {
                o.b = bound;
                o.right_censored = 1;
                o.y = bound;
            }
        }
    }
    return s;
}

// Dense normal-equation solve, small p only. Independent of the fitting code.
std::vector<double> solve_normal_equations(const std::vector<CensoredObservation>& data) {
    const std::size_t p = data.front().x.size();
    const std::size_t q = p + 1;  // intercept appended last
    std::vector<std::vector<double>> ata(q, std::vector<double>(q + 1, 0.0));
    for (const auto& o : data) {
        std::vector<double> row = o.x;
        row.push_back(1.0);
        for (std::size_t i = 0; i < q; ++i) {
            for (std::size_t j = 0; j < q; ++j) ata[i][j] += row[i] * row[j];
            ata[i][q] += row[i] * o.y;
        }
    }
    for (std::size_t c = 0; c < q; ++c) {  // Gaussian elimination, partial pivot
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < q; ++r) {
            if (std::abs(ata[r][c]) > std::abs(ata[piv][c])) piv = r;
        }
        std::swap(ata[c], ata[piv]);
        for (std::size_t r = 0; r < q; ++r) {
            if (r == c) continue;
            const double f = ata[r][c] / ata[c][c];
            for (std::size_t k = c; k <= q; ++k) ata[r][k] -= f * ata[c][k];
        }
    }
    std::vector<double> out(q);
    for (std::size_t i = 0; i < q; ++i) out[i] = ata[i][q] / ata[i][i];
    return out;  // [beta..., intercept]
}

double inf_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("likelihood terms match their closed forms") {
    // interior row at the mean: density term is -log(sigma*sqrt(2*pi))
    CensoredObservation interior;
    interior.x = {0.0};
    interior.y = 0.0;
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(log_likelihood({interior}, {0.0}, 1.0) ==
          Catch::Approx(-half_log_2pi).epsilon(1e-14));
    CHECK(log_likelihood({interior}, {0.0}, 1.0) == Catch::Approx(-0.9189385332046727).epsilon(1e-12));
    CHECK(log_likelihood({interior}, {0.0}, 2.0) ==
          Catch::Approx(-half_log_2pi - std::log(2.0)).epsilon(1e-14));

    // right-censored exactly at the latent mean: log Phi(0) = log 1/2
    CensoredObservation rc;
    rc.x = {1.0};
    rc.b = 3.0;
    rc.right_censored = 1;
    CHECK(log_likelihood({rc}, {3.0}, 1.0) == Catch::Approx(-std::numbers::ln2).epsilon(1e-14));
    CHECK(log_likelihood({rc}, {3.0}, 1.0) == Catch::Approx(-0.6931471805599453).epsilon(1e-12));

    // left-censored: symmetric tail
    CensoredObservation lc;
    lc.x = {1.0};
    lc.a = 3.0;
    lc.left_censored = 1;
    CHECK(log_likelihood({lc}, {3.0}, 1.0) == Catch::Approx(-std::numbers::ln2).epsilon(1e-14));
    CHECK(log_likelihood({lc}, {1.0}, 1.0) ==
          Catch::Approx(std::log(norm_cdf(2.0))).epsilon(1e-12));

    // terms add across observations
    const double sum =
        log_likelihood({interior, rc, lc}, {3.0}, 1.0);
    CHECK(sum == Catch::Approx(log_likelihood({interior}, {3.0}, 1.0) +
                               log_likelihood({rc}, {3.0}, 1.0) +
                               log_likelihood({lc}, {3.0}, 1.0))
                     .epsilon(1e-14));

    CHECK_THROWS_AS(log_likelihood({interior}, {0.0}, 0.0), NonPositiveSigma);
    CHECK_THROWS_AS(log_likelihood({interior}, {0.0}, -1.0), NonPositiveSigma);
}

TEST_CASE("deep-tail censored terms stay finite") {
    CensoredObservation rc;
    rc.x = {1.0};
    rc.b = 40.0;
    rc.right_censored = 1;
    const double ll = log_likelihood({rc}, {0.0}, 1.0);  // log Phi(-40)
    CHECK(std::isfinite(ll));
    CHECK(ll < -700.0);  // far below what naive log(cdf) could represent
    // asymptotic check: log Phi(-z) ~ -z^2/2 - log(z) - log sqrt(2 pi)
    const double z = 40.0;
    const double approx = -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi);
    CHECK(ll == Catch::Approx(approx).epsilon(1e-3));
}

TEST_CASE("elastic-net log-prior closed forms") {
    CHECK(log_prior({1.0, -2.0}, 1.0, 1.0) == -3.0);
    CHECK(log_prior({1.0, -2.0}, 2.0, 0.0) == -5.0);
    CHECK(log_prior({1.0, -2.0}, 0.0, 0.7) == 0.0);
    CHECK(log_prior({}, 3.0, 0.5) == 0.0);
    // mixes linearly in alpha
    const std::vector<double> b = {0.3, -1.2, 2.0};
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double expect =
            alpha * log_prior(b, 2.0, 1.0) + (1.0 - alpha) * log_prior(b, 2.0, 0.0);
        CHECK(log_prior(b, 2.0, alpha) == Catch::Approx(expect).epsilon(1e-14));
    }
    CHECK_THROWS_AS(log_prior({1.0}, -0.5, 0.5), BadHyperparameter);
    CHECK_THROWS_AS(log_prior({1.0}, 1.0, 1.5), BadHyperparameter);
}

TEST_CASE("analytic gradient matches central finite differences") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> nd;
    const double h = 1e-6;
    for (int trial = 0; trial < 25; ++trial) {
        const Sim s = simulate(60, 4, trial % 3 == 0 ? 0.0 : 0.6, 3000 + trial);
        std::vector<double> beta(4);
        // keep coordinates away from the L1 kink
        for (auto& b : beta) b = (nd(rng) > 0 ? 1.0 : -1.0) * (0.2 + std::abs(nd(rng)));
        const double log_sigma = 0.3 * nd(rng);
        const double lambda = trial % 2 ? 0.8 : 0.0;
        const double alpha = 0.4;

        const TobitGradient g = grad_log_posterior(s.data, beta, log_sigma, lambda, alpha);
        auto objective = [&](const std::vector<double>& bt, double ls) {
            return log_likelihood(s.data, bt, std::exp(ls)) + log_prior(bt, lambda, alpha);
        };
        for (std::size_t j = 0; j < beta.size(); ++j) {
            std::vector<double> up = beta, dn = beta;
            up[j] += h;
            dn[j] -= h;
            const double fd = (objective(up, log_sigma) - objective(dn, log_sigma)) / (2.0 * h);
            INFO("trial " << trial << " coord " << j);
            CHECK(g.beta[j] == Catch::Approx(fd).epsilon(1e-5).margin(1e-7));
        }
        const double fd_ls =
            (objective(beta, log_sigma + h) - objective(beta, log_sigma - h)) / (2.0 * h);
        INFO("trial " << trial << " log-sigma");
        CHECK(g.log_sigma == Catch::Approx(fd_ls).epsilon(1e-5).margin(1e-7));
    }
}

TEST_CASE("subgradient convention at zero: sign(0) contributes nothing") {
    const Sim s = simulate(40, 3, 0.5, 77);
    const std::vector<double> beta = {0.0, 1.0, -1.0};
    const TobitGradient with_l1 = grad_log_posterior(s.data, beta, 0.0, 2.0, 1.0);
    const TobitGradient no_prior = grad_log_posterior(s.data, beta, 0.0, 0.0, 1.0);
    CHECK(with_l1.beta[0] == no_prior.beta[0]);           // zero coordinate untouched
    CHECK(with_l1.beta[1] == no_prior.beta[1] - 2.0);     // sign +1
    CHECK(with_l1.beta[2] == no_prior.beta[2] + 2.0);     // sign -1
}

TEST_CASE("unpenalized uncensored fit reproduces least squares") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Sim s = simulate(80, 3, 0.0, seed);
        const TobitFit fit = fit_map(s.data, 0.0, 0.0);
        REQUIRE(fit.diagnostics.converged);

        const auto ols = solve_normal_equations(s.data);
        INFO("seed " << seed);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(fit.beta[j] == Catch::Approx(ols[j]).margin(1e-6));
        }
        CHECK(fit.intercept == Catch::Approx(ols[3]).margin(1e-6));

        double rss = 0.0;
        for (const auto& o : s.data) {
            const double r = o.y - (ols[3] + dot(o.x, {ols[0], ols[1], ols[2]}));
            rss += r * r;
        }
        const double sigma2_ml = rss / static_cast<double>(s.data.size());
        CHECK(fit.sigma * fit.sigma == Catch::Approx(sigma2_ml).margin(1e-6));
    }
}

TEST_CASE("censoring-aware fit recovers truth where naive least squares cannot") {
    int tobit_wins = 0;
    const int trials = 10;
    for (std::uint64_t seed = 0; seed < trials; ++seed) {
        const Sim s = simulate(1500, 4, 0.5, 500 + seed);
        const TobitFit fit = fit_map(s.data, 0.0, 0.0);
        // least squares on the censored y values, as a strawman
        const auto naive = solve_normal_equations(s.data);
        const std::vector<double> naive_beta(naive.begin(), naive.begin() + 4);
        const double err_tobit = inf_norm_diff(fit.beta, s.beta_true);
        const double err_naive = inf_norm_diff(naive_beta, s.beta_true);
        if (err_tobit < err_naive) ++tobit_wins;
        CHECK(err_tobit < 0.15);
    }
    CHECK(tobit_wins >= 8);
}

TEST_CASE("fit rejects degenerate designs") {
    CHECK_THROWS_AS(fit_map({}, 0.0, 0.0), DegenerateDesign);

    Sim s = simulate(4, 3, 0.0, 9);  // n < p + 2
    CHECK_THROWS_AS(fit_map(s.data, 0.0, 0.0), DegenerateDesign);

    Sim all_cens = simulate(30, 2, 0.0, 10);
    for (auto& o : all_cens.data) {
        o.right_censored = 1;
        o.b = o.y;
    }
    CHECK_THROWS_AS(fit_map(all_cens.data, 0.0, 0.0), DegenerateDesign);

    Sim ok = simulate(30, 2, 0.0, 11);
    CHECK_THROWS_AS(fit_map(ok.data, -1.0, 0.5), BadHyperparameter);
    CHECK_THROWS_AS(fit_map(ok.data, 1.0, 2.0), BadHyperparameter);

    Sim ragged = simulate(30, 2, 0.0, 12);
    ragged.data[5].x.push_back(1.0);
    CHECK_THROWS_AS(fit_map(ragged.data, 0.0, 0.0), WidthMismatch);
}

TEST_CASE("pseudo r-squared properties") {
    // the null model explains nothing about itself
    Sim noise = simulate(120, 1, 0.3, 21);
    std::vector<CensoredObservation> null_obs = noise.data;
    for (auto& o : null_obs) o.x.clear();
    const TobitFit null_fit = fit_map(null_obs, 0.0, 0.0);
    CHECK(pseudo_r2(null_fit, null_obs) == Catch::Approx(0.0).margin(1e-9));

    // strong signal: strictly positive
    const Sim strong = simulate(300, 3, 0.4, 22);
    const TobitFit fit = fit_map(strong.data, 0.0, 0.0);
    CHECK(pseudo_r2(fit, strong.data) > 0.1);

    // nested informative features: r2 never decreases as features accumulate
    double prev = -1.0;
    for (std::size_t keep = 0; keep <= 3; ++keep) {
        std::vector<CensoredObservation> sub = strong.data;
        for (auto& o : sub) o.x.resize(keep);
        const TobitFit f = fit_map(sub, 0.0, 0.0);
        const double r2 = pseudo_r2(f, sub);
        CHECK(r2 >= prev - 1e-8);
        prev = r2;
    }
}

TEST_CASE("lasso above the null-gradient threshold zeroes every coefficient") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Sim s = simulate(200, 4, 0.4, 900 + seed);
        const double threshold = null_gradient_threshold(s.data);
        CHECK(threshold > 0.0);
        const TobitFit fit = fit_map(s.data, threshold * 1.05, 1.0);
        INFO("seed " << seed << " threshold " << threshold);
        for (double b : fit.beta) CHECK(b == 0.0);

        // strictly below: at least one coefficient moves off zero
        const TobitFit loose = fit_map(s.data, threshold * 0.5, 1.0);
        double l1 = 0.0;
        for (double b : loose.beta) l1 += std::abs(b);
        CHECK(l1 > 0.0);
    }
}

TEST_CASE("coefficient l1 norm is non-increasing in lambda along the path") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Sim s = simulate(150, 4, 0.4, 1300 + seed);
        const auto grid = default_lambda_grid(s.data, 1.0, 12);
        const RegPath path = regularization_path(s.data, grid, 1.0);
        REQUIRE(path.coefficients.size() == grid.size());
        double prev = -1.0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double l1 = 0.0;
            for (double b : path.coefficients[i]) l1 += std::abs(b);
            if (i > 0) CHECK(l1 >= prev - 1e-7);  // lambda decreasing => l1 grows
            prev = l1;
        }
    }
}

TEST_CASE("path endpoint at lambda=0 equals the direct unpenalized fit") {
    const Sim s = simulate(100, 3, 0.3, 31);
    const RegPath path = regularization_path(s.data, {1.0, 0.1, 0.0}, 1.0);
    const TobitFit direct = fit_map(s.data, 0.0, 1.0);
    CHECK(inf_norm_diff(path.coefficients.back(), direct.beta) < 1e-5);
    CHECK(path.intercepts.back() == Catch::Approx(direct.intercept).margin(1e-5));
    CHECK(path.sigmas.back() == Catch::Approx(direct.sigma).margin(1e-5));
}

TEST_CASE("regularization path input validation") {
    const Sim s = simulate(50, 2, 0.0, 41);
    CHECK_THROWS_AS(regularization_path(s.data, {}, 0.5), BadOptions);
    CHECK_THROWS_AS(regularization_path(s.data, {0.1, 0.5}, 0.5), BadOptions);
    CHECK_THROWS_AS(regularization_path(s.data, {0.5, 0.5}, 0.5), BadOptions);
}

TEST_CASE("bootstrap is deterministic per seed and summarizes sensibly") {
    const Sim s = simulate(120, 2, 0.3, 51);
    const BootstrapSummary a = bootstrap_fit(s.data, 0.0, 0.0, 30, 7);
    const BootstrapSummary b = bootstrap_fit(s.data, 0.0, 0.0, 30, 7);
    REQUIRE(a.beta.size() == 2);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(a.beta[j].lo == b.beta[j].lo);
        CHECK(a.beta[j].hi == b.beta[j].hi);
        CHECK(a.beta[j].lo <= a.beta[j].hi);
    }
    CHECK(a.sigma.lo == b.sigma.lo);
    CHECK(a.replicates_failed == 0);

    const BootstrapSummary c = bootstrap_fit(s.data, 0.0, 0.0, 30, 8);
    bool any_diff = false;
    for (std::size_t j = 0; j < 2; ++j) any_diff |= (a.beta[j].lo != c.beta[j].lo);
    CHECK(any_diff);

    CHECK_THROWS_AS(bootstrap_fit(s.data, 0.0, 0.0, 0, 7), BadOptions);
}

TEST_CASE("bootstrap intervals bracket the full-data point estimate") {
    const Sim s = simulate(40, 1, 0.0, 61);
    const BootstrapSummary sum = bootstrap_fit(s.data, 0.0, 0.0, 50, 3);
    CHECK(sum.beta[0].lo <= sum.beta[0].point);
    CHECK(sum.beta[0].point <= sum.beta[0].hi);
    CHECK_FALSE(sum.beta[0].point_outside);
    CHECK(sum.sigma.lo > 0.0);
}

TEST_CASE("model json serialization round-trips and predicts identically") {
    Dataset d;
    d.manifest = {"f0", "f1"};
    std::mt19937_64 rng(71);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 60; ++i) {
        SurvivalOutcome o;
        const double x0 = nd(rng), x1 = nd(rng);
        o.scaled_y = 5.0 + 2.0 * x0 - x1 + 0.3 * nd(rng);
        if (i % 4 == 0) {
            o.censor_bound_b = o.scaled_y;  // censor at the observed value
            o.alive_at_fetch = 1;
        }
        d.add_row({x0, x1}, o);
    }
    const TobitModel m = fit_tobit_model(d, 0.1, 0.5);
    const nlohmann::json j = m.to_json();
    const TobitModel back = TobitModel::from_json(j);
    CHECK(back.to_json() == j);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> probe = {nd(rng), nd(rng)};
        CHECK(m.predict(probe) == back.predict(probe));
    }
    CHECK(j.at("model_type") == "tobit");
}

TEST_CASE("observations_from_dataset maps censoring faithfully") {
    Dataset d;
    d.manifest = {"f0"};
    SurvivalOutcome interior;
    interior.scaled_y = 12.0;
    SurvivalOutcome censored;
    censored.scaled_y = 30.0;
    censored.censor_bound_b = 30.0;
    censored.alive_at_fetch = 1;
    d.add_row({1.0}, interior);
    d.add_row({2.0}, censored);
    const auto obs = observations_from_dataset(d);
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].right_censored == 0);
    CHECK(obs[0].y == 12.0);
    CHECK(obs[1].right_censored == 1);
    CHECK(obs[1].b == 30.0);
}
