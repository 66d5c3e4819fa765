#pragma once

// Bagged regression trees with feature subsampling. Trees are stored as
// flat node arrays; split selection is fully deterministic per seed
// (ties break toward the lowest feature index, then lowest threshold).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkrot/dataset.hpp"
#include "linkrot/errors.hpp"

namespace linkrot {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf mean
    int count = 0;

    bool is_leaf() const { return feature < 0; }
};

struct ForestOptions {
    int n_trees = 200;
    int max_depth = 0;  // 0 = unlimited
    int min_leaf = 5;
    int features_per_split = 0;  // 0 = ceil(p/3)
};

struct ForestModel {
    std::vector<std::string> manifest;
    std::vector<std::vector<TreeNode>> trees;
    ForestOptions options;
    std::uint64_t seed = 0;

    double predict(const std::vector<double>& x) const {
        if (x.size() != manifest.size()) throw WidthMismatch("forest predict width");
        double sum = 0.0;
        for (const auto& tree : trees) {
            int node = 0;
            while (!tree[static_cast<std::size_t>(node)].is_leaf()) {
                const auto& nd = tree[static_cast<std::size_t>(node)];
                node = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                               : nd.right;
            }
            sum += tree[static_cast<std::size_t>(node)].value;
        }
        return sum / static_cast<double>(trees.size());
    }

    nlohmann::json to_json() const {
        nlohmann::json trees_json = nlohmann::json::array();
        for (const auto& tree : trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& nd : tree) {
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"l", nd.left},
                                 {"r", nd.right},
                                 {"v", nd.value},
                                 {"c", nd.count}});
            }
            trees_json.push_back(std::move(nodes));
        }
        return nlohmann::json{{"model_type", "forest"},
                              {"manifest", manifest},
                              {"options",
                               {{"n_trees", options.n_trees},
                                {"max_depth", options.max_depth},
                                {"min_leaf", options.min_leaf},
                                {"features_per_split", options.features_per_split}}},
                              {"seed", seed},
                              {"trees", trees_json}};
    }

    static ForestModel from_json(const nlohmann::json& j) {
        ForestModel m;
        m.manifest = j.at("manifest").get<std::vector<std::string>>();
        const auto& o = j.at("options");
        m.options.n_trees = o.at("n_trees").get<int>();
        m.options.max_depth = o.at("max_depth").get<int>();
        m.options.min_leaf = o.at("min_leaf").get<int>();
        m.options.features_per_split = o.at("features_per_split").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& tree_json : j.at("trees")) {
            std::vector<TreeNode> tree;
            for (const auto& nj : tree_json) {
                TreeNode nd;
                nd.feature = nj.at("f").get<int>();
                nd.threshold = nj.at("t").get<double>();
                nd.left = nj.at("l").get<int>();
                nd.right = nj.at("r").get<int>();
                nd.value = nj.at("v").get<double>();
                nd.count = nj.at("c").get<int>();
                tree.push_back(nd);
            }
            m.trees.push_back(std::move(tree));
        }
        return m;
    }
};

namespace detail_forest {

struct Builder {
    const std::vector<std::vector<double>>& x;
    const std::vector<double>& y;
    const ForestOptions& opts;
    int m_features;
    std::mt19937_64& rng;
    std::vector<TreeNode> nodes;

    int make_leaf(const std::vector<std::size_t>& idx) {
        TreeNode nd;
        double sum = 0.0;
        for (auto i : idx) sum += y[i];
        nd.value = sum / static_cast<double>(idx.size());
        nd.count = static_cast<int>(idx.size());
        nodes.push_back(nd);
        return static_cast<int>(nodes.size()) - 1;
    }

    int build(std::vector<std::size_t>& idx, int depth) {
        const std::size_t n = idx.size();
        const std::size_t p = x.front().size();
        if (n < 2 * static_cast<std::size_t>(opts.min_leaf) ||
            (opts.max_depth > 0 && depth >= opts.max_depth)) {
            return make_leaf(idx);
        }
        double sum = 0.0, sq = 0.0;
        for (auto i : idx) {
            sum += y[i];
            sq += y[i] * y[i];
        }
        const double total_sse = sq - sum * sum / static_cast<double>(n);
        if (total_sse <= 1e-12) return make_leaf(idx);

        // Sample m features without replacement, then examine them in
        // ascending index order so tie-breaking is stable.
        std::vector<std::size_t> feats(p);
        std::iota(feats.begin(), feats.end(), 0);
        for (int k = 0; k < m_features; ++k) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), p - 1);
            std::swap(feats[static_cast<std::size_t>(k)], feats[pick(rng)]);
        }
        feats.resize(static_cast<std::size_t>(m_features));
        std::sort(feats.begin(), feats.end());

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_sse = total_sse;
        std::vector<std::size_t> order(idx);
        for (std::size_t f : feats) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x[a][f] < x[b][f];
            });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t k = 0; k + 1 < n; ++k) {
                const std::size_t i = order[k];
                left_sum += y[i];
                left_sq += y[i] * y[i];
                const std::size_t nl = k + 1, nr = n - nl;
                if (nl < static_cast<std::size_t>(opts.min_leaf) ||
                    nr < static_cast<std::size_t>(opts.min_leaf)) {
                    continue;
                }
                if (x[order[k]][f] == x[order[k + 1]][f]) continue;  // no boundary here
                const double right_sum = sum - left_sum;
                const double right_sq = sq - left_sq;
                const double sse =
                    (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                    (right_sq - right_sum * right_sum / static_cast<double>(nr));
                if (sse < best_sse - 1e-12) {
                    best_sse = sse;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (x[order[k]][f] + x[order[k + 1]][f]);
                }
            }
        }
        if (best_feature < 0) return make_leaf(idx);

        std::vector<std::size_t> left_idx, right_idx;
        for (auto i : idx) {
            (x[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx
                                                                            : right_idx)
                .push_back(i);
        }
        TreeNode nd;
        nd.feature = best_feature;
        nd.threshold = best_threshold;
        nd.count = static_cast<int>(n);
        nodes.push_back(nd);
        const int self = static_cast<int>(nodes.size()) - 1;
        const int l = build(left_idx, depth + 1);
        const int r = build(right_idx, depth + 1);
        nodes[static_cast<std::size_t>(self)].left = l;
        nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
};

}  // namespace detail_forest

inline ForestModel fit_forest(const std::vector<std::vector<double>>& x,
                              const std::vector<double>& y,
                              const std::vector<std::string>& manifest, const ForestOptions& opts,
                              std::uint64_t seed) {
    if (x.size() < 2 || x.size() != y.size()) throw BadOptions("need >= 2 rows");
    const std::size_t p = x.front().size();
    if (p == 0 || manifest.size() != p) throw WidthMismatch("manifest/feature width");
    if (opts.n_trees < 1 || opts.min_leaf < 1) throw BadOptions("bad forest options");
    int m = opts.features_per_split;
    if (m == 0) m = static_cast<int>((p + 2) / 3);
    if (m < 1 || m > static_cast<int>(p)) throw BadOptions("features_per_split out of range");

    ForestModel model;
    model.manifest = manifest;
    model.options = opts;
    model.options.features_per_split = m;
    model.seed = seed;
    const std::size_t n = x.size();
    for (int t = 0; t < opts.n_trees; ++t) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(t)};
        std::mt19937_64 rng(seq);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<std::size_t> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i) sample.push_back(pick(rng));
        detail_forest::Builder builder{x, y, model.options, m, rng, {}};
        builder.build(sample, 0);
        model.trees.push_back(std::move(builder.nodes));
    }
    return model;
}

inline ForestModel fit_forest_model(const Dataset& d, const ForestOptions& opts,
                                    std::uint64_t seed) {
    std::vector<double> y;
    y.reserve(d.n_rows());
    for (const auto& o : d.outcomes) y.push_back(o.scaled_y);
    return fit_forest(d.x, y, d.manifest, opts, seed);
}

inline double forest_mse(const ForestModel& m, const std::vector<std::vector<double>>& x,
                         const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = m.predict(x[i]) - y[i];
        s += e * e;
    }
    return s / static_cast<double>(x.size());
}

/// Mean MSE increase over r column permutations, per feature. A feature no
/// tree splits on (or a constant column) scores exactly 0.
inline std::vector<double> permutation_importance(const ForestModel& m,
                                                  const std::vector<std::vector<double>>& x,
                                                  const std::vector<double>& y,
                                                  std::uint64_t seed, int repeats = 10) {
    if (x.empty()) throw BadOptions("empty evaluation set");
    const std::size_t p = m.manifest.size();
    const double baseline = forest_mse(m, x, y);
    std::vector<bool> used(p, false);
    for (const auto& tree : m.trees) {
        for (const auto& nd : tree) {
            if (nd.feature >= 0) used[static_cast<std::size_t>(nd.feature)] = true;
        }
    }
    std::vector<double> importance(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (!used[j]) continue;  // permuting it cannot move any prediction
        double acc = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            std::seed_seq seq{seed, static_cast<std::uint64_t>(j),
                              static_cast<std::uint64_t>(rep)};
            std::mt19937_64 rng(seq);
            std::vector<std::size_t> perm(x.size());
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<std::vector<double>> permuted = x;
            for (std::size_t i = 0; i < x.size(); ++i) permuted[i][j] = x[perm[i]][j];
            acc += forest_mse(m, permuted, y);
        }
        importance[j] = acc / static_cast<double>(repeats) - baseline;
    }
    return importance;
}

}  // namespace linkrot
