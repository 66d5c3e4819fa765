#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "linkrot/forest.hpp"

using namespace linkrot;

namespace {

struct XY {
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::vector<std::string> manifest;
};

// y = 3*x0 - 2*x1 + noise; x2 is pure noise.
XY make_signal(std::size_t n, double noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    XY d;
    d.manifest = {"f0", "f1", "f2"};
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = nd(rng), x1 = nd(rng), x2 = nd(rng);
        d.x.push_back({x0, x1, x2});
        d.y.push_back(3.0 * x0 - 2.0 * x1 + noise_sd * nd(rng));
    }
    return d;
}

// Independent traversal: walk the flat node array by hand.
double traverse(const std::vector<TreeNode>& nodes, const std::vector<double>& x) {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                ? static_cast<std::size_t>(nodes[i].left)
                : static_cast<std::size_t>(nodes[i].right);
    }
    return nodes[i].value;
}

}  // namespace

TEST_CASE("a constant target yields constant predictions") {
    XY d = make_signal(50, 0.0, 1);
    std::fill(d.y.begin(), d.y.end(), 4.25);
    ForestOptions opts;
    opts.n_trees = 20;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 9);
    for (const auto& row : d.x) CHECK(m.predict(row) == 4.25);
}

TEST_CASE("deep trees with min_leaf 1 memorize a noiseless target") {
    // Each distinct x duplicated heavily so every bootstrap bag contains all of
    // them; each tree then splits down to pure leaves and reproduces y.
    XY d;
    d.manifest = {"f0"};
    for (int i = 0; i < 30; ++i) {
        for (int rep = 0; rep < 30; ++rep) {
            d.x.push_back({static_cast<double>(i)});
            d.y.push_back(std::sin(static_cast<double>(i)));
        }
    }
    ForestOptions opts;
    opts.n_trees = 25;
    opts.min_leaf = 1;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 4);
    CHECK(forest_mse(m, d.x, d.y) < 1e-6);
    for (int i = 0; i < 30; ++i) {
        CHECK(m.predict({static_cast<double>(i)}) ==
              Catch::Approx(std::sin(static_cast<double>(i))).margin(1e-9));
    }
}

TEST_CASE("training is deterministic per seed") {
    const XY d = make_signal(200, 0.5, 2);
    ForestOptions opts;
    opts.n_trees = 25;
    const ForestModel a = fit_forest(d.x, d.y, d.manifest, opts, 11);
    const ForestModel b = fit_forest(d.x, d.y, d.manifest, opts, 11);
    const ForestModel c = fit_forest(d.x, d.y, d.manifest, opts, 12);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_json() != c.to_json());
    const XY probe = make_signal(20, 0.5, 3);
    for (const auto& row : probe.x) CHECK(a.predict(row) == b.predict(row));
}

TEST_CASE("predict equals the mean of independent per-tree traversals") {
    const XY d = make_signal(150, 0.5, 6);
    ForestOptions opts;
    opts.n_trees = 15;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 21);
    const XY probe = make_signal(30, 0.5, 7);
    for (const auto& row : probe.x) {
        double s = 0.0;
        for (const auto& tree : m.trees) s += traverse(tree, row);
        CHECK(m.predict(row) == Catch::Approx(s / static_cast<double>(m.trees.size()))
                                    .epsilon(1e-14));
    }
}

TEST_CASE("tree structure invariants hold") {
    const XY d = make_signal(120, 0.5, 8);
    ForestOptions opts;
    opts.n_trees = 10;
    opts.min_leaf = 5;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 31);
    for (const auto& tree : m.trees) {
        REQUIRE_FALSE(tree.empty());
        for (std::size_t i = 0; i < tree.size(); ++i) {
            const TreeNode& nd = tree[i];
            if (nd.feature >= 0) {
                CHECK(nd.feature < 3);
                REQUIRE(nd.left > static_cast<int>(i));
                REQUIRE(nd.right > static_cast<int>(i));
                CHECK(nd.left < static_cast<int>(tree.size()));
                CHECK(nd.right < static_cast<int>(tree.size()));
                // children partition the parent's sample
                CHECK(tree[static_cast<std::size_t>(nd.left)].count +
                          tree[static_cast<std::size_t>(nd.right)].count ==
                      nd.count);
            } else {
                CHECK(nd.count >= opts.min_leaf);
            }
        }
    }
}

TEST_CASE("forest beats a single tree out of sample on noisy signal") {
    int forest_wins = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const XY train = make_signal(300, 1.0, 100 + seed);
        const XY test = make_signal(300, 1.0, 200 + seed);
        ForestOptions single;
        single.n_trees = 1;
        ForestOptions many;
        many.n_trees = 100;
        const ForestModel one = fit_forest(train.x, train.y, train.manifest, single, seed);
        const ForestModel lots = fit_forest(train.x, train.y, train.manifest, many, seed);
        if (forest_mse(lots, test.x, test.y) <= forest_mse(one, test.x, test.y)) ++forest_wins;
    }
    CHECK(forest_wins >= 9);
}

TEST_CASE("permutation importance separates signal from noise") {
    const XY train = make_signal(400, 0.5, 41);
    const XY test = make_signal(400, 0.5, 42);
    ForestOptions opts;
    opts.n_trees = 100;
    const ForestModel m = fit_forest(train.x, train.y, train.manifest, opts, 43);
    const auto imp = permutation_importance(m, test.x, test.y, 44);
    REQUIRE(imp.size() == 3);
    CHECK(imp[0] > imp[2]);
    CHECK(imp[1] > imp[2]);
    CHECK(imp[0] > 1.0);  // dominant signal feature
    CHECK(std::abs(imp[2]) < 0.5 * imp[0]);
}

TEST_CASE("importance of a feature no split uses is exactly zero") {
    XY d;
    d.manifest = {"used", "constant"};
    std::mt19937_64 rng(51);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const double x0 = nd(rng);
        d.x.push_back({x0, 7.0});  // constant column can never split
        d.y.push_back(2.0 * x0 + 0.1 * nd(rng));
    }
    ForestOptions opts;
    opts.n_trees = 30;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 52);
    const auto imp = permutation_importance(m, d.x, d.y, 53);
    CHECK(imp[1] == 0.0);
    CHECK(imp[0] > 0.0);
}

TEST_CASE("importance is deterministic per seed") {
    const XY d = make_signal(150, 0.5, 61);
    ForestOptions opts;
    opts.n_trees = 20;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 62);
    CHECK(permutation_importance(m, d.x, d.y, 63) == permutation_importance(m, d.x, d.y, 63));
}

TEST_CASE("json round trip preserves structure and predictions") {
    const XY d = make_signal(100, 0.5, 71);
    ForestOptions opts;
    opts.n_trees = 12;
    const ForestModel m = fit_forest(d.x, d.y, d.manifest, opts, 72);
    const nlohmann::json j = m.to_json();
    const ForestModel back = ForestModel::from_json(j);
    CHECK(back.to_json() == j);
    const XY probe = make_signal(25, 0.5, 73);
    for (const auto& row : probe.x) CHECK(m.predict(row) == back.predict(row));
    CHECK(j.at("model_type") == "forest");
}

TEST_CASE("option validation") {
    const XY d = make_signal(30, 0.5, 81);
    ForestOptions bad;
    bad.n_trees = 0;
    CHECK_THROWS_AS(fit_forest(d.x, d.y, d.manifest, bad, 1), BadOptions);
    bad.n_trees = 5;
    bad.min_leaf = 0;
    CHECK_THROWS_AS(fit_forest(d.x, d.y, d.manifest, bad, 1), BadOptions);
    bad.min_leaf = 1;
    bad.features_per_split = 9;
    CHECK_THROWS_AS(fit_forest(d.x, d.y, d.manifest, bad, 1), BadOptions);
    CHECK_THROWS_AS(fit_forest({}, {}, d.manifest, ForestOptions{}, 1), BadOptions);
    CHECK_THROWS_AS(fit_forest(d.x, d.y, {"one"}, ForestOptions{}, 1), WidthMismatch);
}

TEST_CASE("default features_per_split is the ceiling of p/3") {
    std::vector<std::string> manifest;
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    std::mt19937_64 rng(91);
    std::normal_distribution<double> nd;
    for (std::size_t j = 0; j < 7; ++j) manifest.push_back("f" + std::to_string(j));
    for (int i = 0; i < 30; ++i) {
        std::vector<double> row(7);
        for (auto& v : row) v = nd(rng);
        x.push_back(row);
        y.push_back(nd(rng));
    }
    ForestOptions opts;
    opts.n_trees = 2;
    const ForestModel m = fit_forest(x, y, manifest, opts, 92);
    CHECK(m.options.features_per_split == 3);  // ceil(7/3)
}
