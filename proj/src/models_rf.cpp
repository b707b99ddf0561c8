#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "calm/error.hpp"
#include "calm/models.hpp"
#include "calm/rng.hpp"

namespace calm {

namespace {

double gini(const std::vector<double>& counts, double total) {
    double g = 1.0;
    for (const double c : counts) {
        const double p = c / total;
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    std::size_t n_classes;
    const RfConfig& config;
    Rng& rng;
    DecisionTree tree;
    std::vector<int> feature_pool;

    int build(std::vector<std::size_t>& indices, int depth) {
        const std::size_t n = indices.size();
        std::vector<double> counts(n_classes, 0.0);
        for (const std::size_t i : indices) {
            counts[static_cast<std::size_t>(y[i])] += 1.0;
        }
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        const bool depth_capped = config.max_depth > 0 && depth >= config.max_depth;
        if (pure || depth_capped || n < 2 * static_cast<std::size_t>(config.min_samples_leaf) || n < 2) {
            return make_leaf(std::move(counts));
        }

        int m = config.features_per_split;
        if (m <= 0) {
            m = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols)))));
        }
        m = std::min(m, static_cast<int>(x.cols));
        // partial Fisher-Yates over the feature pool
        for (int k = 0; k < m; ++k) {
            const auto j = k + static_cast<int>(rng.below(static_cast<std::uint64_t>(feature_pool.size() - static_cast<std::size_t>(k))));
            std::swap(feature_pool[static_cast<std::size_t>(k)], feature_pool[static_cast<std::size_t>(j)]);
        }

        const double parent_score = gini(counts, static_cast<double>(n));
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = parent_score - 1e-12;

        std::vector<std::pair<double, std::size_t>> order(n);
        std::vector<double> left_counts(n_classes);
        for (int k = 0; k < m; ++k) {
            const int f = feature_pool[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i < n; ++i) {
                order[i] = {x.at(indices[i], static_cast<std::size_t>(f)), indices[i]};
            }
            std::sort(order.begin(), order.end());
            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_counts[static_cast<std::size_t>(y[order[i].second])] += 1.0;
                if (!(order[i].first < order[i + 1].first)) {
                    continue;
                }
                const auto n_left = static_cast<double>(i + 1);
                const auto n_right = static_cast<double>(n - i - 1);
                if (n_left < config.min_samples_leaf || n_right < config.min_samples_leaf) {
                    continue;
                }
                double g_left = 1.0;
                double g_right = 1.0;
                for (std::size_t c = 0; c < n_classes; ++c) {
                    const double pl = left_counts[c] / n_left;
                    const double pr = (counts[c] - left_counts[c]) / n_right;
                    g_left -= pl * pl;
                    g_right -= pr * pr;
                }
                const double score = (n_left * g_left + n_right * g_right) / static_cast<double>(n);
                if (score < best_score) {
                    best_score = score;
                    best_feature = f;
                    // midpoint between adjacent distinct values; fall back to
                    // the upper value if the midpoint rounds onto the lower
                    const double mid = 0.5 * (order[i].first + order[i + 1].first);
                    best_threshold = (order[i].first < mid) ? mid : order[i + 1].first;
                }
            }
        }

        if (best_feature < 0) {
            return make_leaf(std::move(counts));
        }

        std::vector<std::size_t> left_idx;
        std::vector<std::size_t> right_idx;
        left_idx.reserve(n);
        right_idx.reserve(n);
        for (const std::size_t i : indices) {
            if (x.at(i, static_cast<std::size_t>(best_feature)) < best_threshold) {
                left_idx.push_back(i);
            } else {
                right_idx.push_back(i);
            }
        }

        const auto node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int left = build(left_idx, depth + 1);
        const int right = build(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }

    int make_leaf(std::vector<double>&& counts) {
        const auto node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[static_cast<std::size_t>(node_id)].class_counts = std::move(counts);
        return node_id;
    }
};

const TreeNode& route(const DecisionTree& tree, std::span<const double> row) {
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
        node = row[static_cast<std::size_t>(node->feature)] < node->threshold
                   ? &tree.nodes[static_cast<std::size_t>(node->left)]
                   : &tree.nodes[static_cast<std::size_t>(node->right)];
    }
    return *node;
}

int leaf_vote(const TreeNode& leaf) {
    int best = 0;
    for (std::size_t c = 1; c < leaf.class_counts.size(); ++c) {
        if (leaf.class_counts[c] > leaf.class_counts[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(c);
        }
    }
    return best;
}

} // namespace

RandomForestModel train_random_forest(const Matrix& x, const std::vector<int>& y, const ModelMeta& meta,
                                      const RfConfig& config) {
    if (x.rows != y.size()) {
        throw ContractError("X/y row mismatch");
    }
    if (x.rows < 10) {
        throw ContractError("random forest training needs at least 10 rows");
    }
    if (meta.feature_names.size() != x.cols) {
        throw ContractError("feature_names do not match X columns");
    }
    for (const double v : x.data) {
        if (!std::isfinite(v)) {
            throw ContractError("X contains non-finite values; impute before training");
        }
    }
    const std::size_t n_classes = meta.classes.size();
    for (const int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
            throw ContractError("label outside the class set");
        }
    }
    bool single_class = true;
    for (const int label : y) {
        if (label != y.front()) {
            single_class = false;
            break;
        }
    }
    if (single_class) {
        std::fprintf(stderr, "warning: training set contains a single class; forest is degenerate\n");
    }

    RandomForestModel model;
    model.config = config;
    model.meta = meta;
    model.trees.resize(static_cast<std::size_t>(config.n_trees));
    for (int t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(meta.seed, "rf-tree", static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> bootstrap(x.rows);
        for (auto& idx : bootstrap) {
            idx = static_cast<std::size_t>(rng.below(x.rows));
        }
        TreeBuilder builder{x, y, n_classes, config, rng, {}, {}};
        builder.feature_pool.resize(x.cols);
        std::iota(builder.feature_pool.begin(), builder.feature_pool.end(), 0);
        builder.build(bootstrap, 0);
        model.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    }
    return model;
}

Prediction rf_predict(const RandomForestModel& model, const Matrix& x) {
    if (x.cols != model.meta.feature_names.size()) {
        throw ContractError("prediction matrix has " + std::to_string(x.cols) + " columns, model expects " +
                            std::to_string(model.meta.feature_names.size()));
    }
    const std::size_t n_classes = model.meta.classes.size();
    Prediction out;
    out.labels.resize(x.rows);
    out.confidence.resize(x.rows);
    std::vector<double> votes(n_classes);
    for (std::size_t r = 0; r < x.rows; ++r) {
        std::fill(votes.begin(), votes.end(), 0.0);
        for (const auto& tree : model.trees) {
            votes[static_cast<std::size_t>(leaf_vote(route(tree, x.row(r))))] += 1.0;
        }
        int best = 0;
        for (std::size_t c = 1; c < n_classes; ++c) {
            if (votes[c] > votes[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(c);
            }
        }
        out.labels[r] = best;
        out.confidence[r] = votes[static_cast<std::size_t>(best)] / static_cast<double>(model.trees.size());
    }
    return out;
}

std::vector<double> rf_feature_importance(const RandomForestModel& model) {
    const std::size_t d = model.meta.feature_names.size();
    std::vector<double> importance(d, 0.0);

    for (const auto& tree : model.trees) {
        // recover per-node sample counts from leaf counts
        std::vector<double> node_total(tree.nodes.size(), 0.0);
        std::vector<std::vector<double>> node_counts(tree.nodes.size());
        for (std::size_t i = tree.nodes.size(); i-- > 0;) {
            const auto& node = tree.nodes[i];
            if (node.is_leaf()) {
                node_counts[i] = node.class_counts;
            } else {
                const auto& l = node_counts[static_cast<std::size_t>(node.left)];
                const auto& r = node_counts[static_cast<std::size_t>(node.right)];
                node_counts[i].resize(l.size());
                for (std::size_t c = 0; c < l.size(); ++c) {
                    node_counts[i][c] = l[c] + r[c];
                }
            }
            node_total[i] = std::accumulate(node_counts[i].begin(), node_counts[i].end(), 0.0);
        }
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const auto& node = tree.nodes[i];
            if (node.is_leaf()) {
                continue;
            }
            const auto li = static_cast<std::size_t>(node.left);
            const auto ri = static_cast<std::size_t>(node.right);
            const double decrease = node_total[i] * gini(node_counts[i], node_total[i]) -
                                    node_total[li] * gini(node_counts[li], node_total[li]) -
                                    node_total[ri] * gini(node_counts[ri], node_total[ri]);
            importance[static_cast<std::size_t>(node.feature)] += decrease;
        }
    }

    const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (total > 0.0) {
        for (double& v : importance) {
            v /= total;
        }
    }
    return importance;
}

} // namespace calm
