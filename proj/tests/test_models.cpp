#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "calm/error.hpp"
#include "calm/models.hpp"
#include "calm/rng.hpp"
#include "test_support.hpp"

using namespace calm;
using calm::test::TempDir;
using calm::test::read_file;

namespace {

ModelMeta meta_for(std::size_t n_features, std::size_t n_classes, std::uint64_t seed) {
    ModelMeta meta;
    for (std::size_t i = 0; i < n_features; ++i) {
        meta.feature_names.push_back("f" + std::to_string(i));
    }
    for (std::size_t i = 0; i < n_classes; ++i) {
        meta.classes.push_back("c" + std::to_string(i));
    }
    meta.seed = seed;
    return meta;
}

// well-separated Gaussian blobs, one per class
struct Blobs {
    Matrix x_train, x_test;
    std::vector<int> y_train, y_test;
};

Blobs make_blobs(std::size_t n_per_class, std::size_t n_classes, std::size_t dim, double noise_sd,
                 std::uint64_t seed) {
    Rng rng(seed);
    Blobs b;
    const std::size_t train_per_class = n_per_class * 3 / 4;
    b.x_train = Matrix(train_per_class * n_classes, dim);
    b.x_test = Matrix((n_per_class - train_per_class) * n_classes, dim);
    std::size_t train_row = 0;
    std::size_t test_row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            const bool is_train = i < train_per_class;
            auto row = is_train ? b.x_train.row(train_row) : b.x_test.row(test_row);
            for (std::size_t d = 0; d < dim; ++d) {
                const double center = (d % n_classes == c) ? 3.0 : 0.0;
                row[d] = center + noise_sd * rng.normal();
            }
            if (is_train) {
                b.y_train.push_back(static_cast<int>(c));
                ++train_row;
            } else {
                b.y_test.push_back(static_cast<int>(c));
                ++test_row;
            }
        }
    }
    return b;
}

double accuracy(const Prediction& pred, const std::vector<int>& truth) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (pred.labels[i] == truth[i]) {
            ++ok;
        }
    }
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

// single-leaf tree that always votes one class
DecisionTree leaf_tree(std::size_t n_classes, std::size_t winner) {
    DecisionTree tree;
    TreeNode node;
    node.class_counts.assign(n_classes, 0.0);
    node.class_counts[winner] = 1.0;
    tree.nodes.push_back(node);
    return tree;
}

} // namespace

TEST_SUITE("models.random_forest") {
    TEST_CASE("separable two-class data reaches 95% held-out accuracy") {
        const auto blobs = make_blobs(100, 2, 1, 0.1, 101);
        const auto model = train_random_forest(blobs.x_train, blobs.y_train, meta_for(1, 2, 101));
        const auto pred = rf_predict(model, blobs.x_test);
        CHECK(accuracy(pred, blobs.y_test) >= 0.95);
        CHECK(model.trees.size() == 100);
    }

    TEST_CASE("single-class training set predicts that class with confidence 1") {
        Matrix x(12, 2);
        Rng rng(102);
        for (auto& v : x.data) {
            v = rng.normal();
        }
        const std::vector<int> y(12, 1);
        const auto model = train_random_forest(x, y, meta_for(2, 3, 102));
        const auto pred = rf_predict(model, x);
        for (std::size_t i = 0; i < x.rows; ++i) {
            CHECK(pred.labels[i] == 1);
            CHECK(pred.confidence[i] == 1.0);
        }
    }

    TEST_CASE("same seed trains byte-identical forests") {
        const auto blobs = make_blobs(40, 3, 4, 0.3, 103);
        const auto a = train_random_forest(blobs.x_train, blobs.y_train, meta_for(4, 3, 103));
        const auto b = train_random_forest(blobs.x_train, blobs.y_train, meta_for(4, 3, 103));
        CHECK(serialize_model(a) == serialize_model(b));
        const auto c = train_random_forest(blobs.x_train, blobs.y_train, meta_for(4, 3, 104));
        CHECK(serialize_model(a) != serialize_model(c));
    }

    TEST_CASE("vote definition on a hand-built forest") {
        RandomForestModel model;
        model.meta = meta_for(1, 2, 0);
        for (int i = 0; i < 80; ++i) {
            model.trees.push_back(leaf_tree(2, 0));
        }
        for (int i = 0; i < 20; ++i) {
            model.trees.push_back(leaf_tree(2, 1));
        }
        Matrix x(1, 1);
        const auto pred = rf_predict(model, x);
        CHECK(pred.labels[0] == 0);
        CHECK(pred.confidence[0] == doctest::Approx(0.80));
    }

    TEST_CASE("a 50/50 tie goes to the lower class index at confidence 0.5") {
        RandomForestModel model;
        model.meta = meta_for(1, 2, 0);
        for (int i = 0; i < 50; ++i) {
            model.trees.push_back(leaf_tree(2, 1));
            model.trees.push_back(leaf_tree(2, 0));
        }
        Matrix x(1, 1);
        const auto pred = rf_predict(model, x);
        CHECK(pred.labels[0] == 0);
        CHECK(pred.confidence[0] == doctest::Approx(0.5));
    }

    TEST_CASE("noise-free training points are reproduced by the forest") {
        const auto blobs = make_blobs(40, 3, 3, 0.05, 105);
        const auto model = train_random_forest(blobs.x_train, blobs.y_train, meta_for(3, 3, 105));
        const auto pred = rf_predict(model, blobs.x_train);
        CHECK(accuracy(pred, blobs.y_train) >= 0.99);
    }

    TEST_CASE("confidences lie on the k/n_trees grid") {
        const auto blobs = make_blobs(30, 3, 3, 1.5, 106); // noisy, mixed votes
        RfConfig cfg;
        cfg.n_trees = 40;
        const auto model = train_random_forest(blobs.x_train, blobs.y_train, meta_for(3, 3, 106), cfg);
        const auto pred = rf_predict(model, blobs.x_test);
        for (const double c : pred.confidence) {
            const double scaled = c * 40.0;
            CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
            CHECK(c > 0.0);
            CHECK(c <= 1.0);
        }
    }

    TEST_CASE("predictions are invariant to a monotone transform of one feature") {
        auto blobs = make_blobs(60, 2, 3, 0.8, 107);
        // test rows whose transformed column values come from the training pool
        Rng rng(108);
        Matrix probe(50, 3);
        for (std::size_t r = 0; r < probe.rows; ++r) {
            for (std::size_t d = 0; d < 3; ++d) {
                probe.at(r, d) = blobs.x_train.at(rng.below(blobs.x_train.rows), d);
            }
        }
        const auto model_raw = train_random_forest(blobs.x_train, blobs.y_train, meta_for(3, 2, 107));
        const auto pred_raw = rf_predict(model_raw, probe);

        const auto transform = [](double v) { return std::exp(v / 2.0); }; // strictly monotone
        auto x_t = blobs.x_train;
        auto probe_t = probe;
        for (std::size_t r = 0; r < x_t.rows; ++r) {
            x_t.at(r, 1) = transform(x_t.at(r, 1));
        }
        for (std::size_t r = 0; r < probe_t.rows; ++r) {
            probe_t.at(r, 1) = transform(probe_t.at(r, 1));
        }
        const auto model_t = train_random_forest(x_t, blobs.y_train, meta_for(3, 2, 107));
        const auto pred_t = rf_predict(model_t, probe_t);
        CHECK(pred_raw.labels == pred_t.labels);
    }

    TEST_CASE("schema mismatch is a contract error") {
        const auto blobs = make_blobs(20, 2, 3, 0.1, 109);
        const auto model = train_random_forest(blobs.x_train, blobs.y_train, meta_for(3, 2, 109));
        Matrix wrong(2, 5);
        CHECK_THROWS_AS(rf_predict(model, wrong), ContractError);
    }

    TEST_CASE("missing values are rejected before training") {
        Matrix x(12, 2);
        x.at(3, 1) = std::numeric_limits<double>::quiet_NaN();
        const std::vector<int> y(12, 0);
        CHECK_THROWS_AS(train_random_forest(x, y, meta_for(2, 1, 1)), ContractError);
    }
}

TEST_SUITE("models.rf_importance") {
    TEST_CASE("importances are normalized") {
        const auto blobs = make_blobs(50, 3, 5, 0.5, 111);
        const auto model = train_random_forest(blobs.x_train, blobs.y_train, meta_for(5, 3, 111));
        const auto imp = rf_feature_importance(model);
        double sum = 0.0;
        for (const double v : imp) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("an informative feature outranks pure noise") {
        Rng rng(112);
        Matrix x(200, 2);
        std::vector<int> y(200);
        for (std::size_t i = 0; i < 200; ++i) {
            y[i] = static_cast<int>(i % 2);
            x.at(i, 0) = static_cast<double>(y[i]) + 0.1 * rng.normal(); // label copy
            x.at(i, 1) = rng.normal();                                   // noise
        }
        const auto model = train_random_forest(x, y, meta_for(2, 2, 112));
        const auto imp = rf_feature_importance(model);
        CHECK(imp[0] > imp[1]);
        CHECK(imp[0] > 0.8);
    }

    TEST_CASE("a hand-built stump assigns all importance to its split feature") {
        RandomForestModel model;
        model.meta = meta_for(3, 2, 0);
        DecisionTree tree;
        TreeNode root;
        root.feature = 1;
        root.threshold = 0.5;
        root.left = 1;
        root.right = 2;
        tree.nodes.push_back(root);
        TreeNode left;
        left.class_counts = {10.0, 0.0};
        tree.nodes.push_back(left);
        TreeNode right;
        right.class_counts = {0.0, 10.0};
        tree.nodes.push_back(right);
        model.trees.push_back(tree);
        const auto imp = rf_feature_importance(model);
        CHECK(imp[0] == 0.0);
        CHECK(imp[1] == doctest::Approx(1.0));
        CHECK(imp[2] == 0.0);
    }
}

TEST_SUITE("models.mlp") {
    TEST_CASE("zero weights produce a uniform softmax") {
        MlpConfig cfg;
        cfg.hidden_dims = {8, 6};
        auto model = init_mlp(4, 3, meta_for(4, 3, 121), cfg);
        for (auto& w : model.weights) {
            std::fill(w.data.begin(), w.data.end(), 0.0);
        }
        Matrix x(5, 4);
        Rng rng(121);
        for (auto& v : x.data) {
            v = rng.normal();
        }
        const auto probs = mlp_predict_proba(model, x);
        for (std::size_t r = 0; r < probs.rows; ++r) {
            for (std::size_t c = 0; c < probs.cols; ++c) {
                CHECK(probs.at(r, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("softmax rows sum to one") {
        MlpConfig cfg;
        cfg.hidden_dims = {16, 8};
        auto model = init_mlp(5, 4, meta_for(5, 4, 122), cfg);
        Matrix x(20, 5);
        Rng rng(122);
        for (auto& v : x.data) {
            v = rng.normal(0.0, 2.0);
        }
        const auto probs = mlp_predict_proba(model, x);
        for (std::size_t r = 0; r < probs.rows; ++r) {
            double sum = 0.0;
            for (std::size_t c = 0; c < probs.cols; ++c) {
                sum += probs.at(r, c);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }

    TEST_CASE("separable two-class data reaches 95% held-out accuracy") {
        const auto blobs = make_blobs(100, 2, 4, 0.2, 123);
        MlpConfig cfg;
        cfg.hidden_dims = {32, 16};
        cfg.max_epochs = 60;
        const auto model =
            train_mlp(blobs.x_train, blobs.y_train, blobs.x_test, blobs.y_test, meta_for(4, 2, 123), cfg);
        const auto pred = mlp_predict(model, blobs.x_test);
        CHECK(accuracy(pred, blobs.y_test) >= 0.95);
    }

    TEST_CASE("same seed and data give identical final weights") {
        const auto blobs = make_blobs(40, 2, 3, 0.3, 124);
        MlpConfig cfg;
        cfg.hidden_dims = {12, 8};
        cfg.max_epochs = 10;
        const auto a = train_mlp(blobs.x_train, blobs.y_train, blobs.x_test, blobs.y_test,
                                 meta_for(3, 2, 124), cfg);
        const auto b = train_mlp(blobs.x_train, blobs.y_train, blobs.x_test, blobs.y_test,
                                 meta_for(3, 2, 124), cfg);
        CHECK(serialize_model(Model(a)) == serialize_model(Model(b)));
    }

    TEST_CASE("training set smaller than one batch is rejected") {
        Matrix x(10, 2);
        std::vector<int> y(10, 0);
        MlpConfig cfg;
        cfg.batch_size = 32;
        CHECK_THROWS_AS(train_mlp(x, y, {}, {}, meta_for(2, 1, 1), cfg), ContractError);
    }

    TEST_CASE("baked input scaling reproduces normalized-path predictions") {
        const auto blobs = make_blobs(60, 3, 4, 0.4, 125);
        MlpConfig cfg;
        cfg.hidden_dims = {16};
        cfg.max_epochs = 8;
        // normalize a copy
        std::vector<double> means(4, 0.0);
        std::vector<double> stds(4, 0.0);
        for (std::size_t d = 0; d < 4; ++d) {
            std::vector<double> col;
            for (std::size_t r = 0; r < blobs.x_train.rows; ++r) {
                col.push_back(blobs.x_train.at(r, d));
            }
            double m = 0.0;
            for (const double v : col) {
                m += v;
            }
            m /= static_cast<double>(col.size());
            double ss = 0.0;
            for (const double v : col) {
                ss += (v - m) * (v - m);
            }
            means[d] = m;
            stds[d] = std::sqrt(ss / static_cast<double>(col.size() - 1));
        }
        auto x_norm = blobs.x_train;
        for (std::size_t r = 0; r < x_norm.rows; ++r) {
            for (std::size_t d = 0; d < 4; ++d) {
                x_norm.at(r, d) = (x_norm.at(r, d) - means[d]) / stds[d];
            }
        }
        auto model = train_mlp(x_norm, blobs.y_train, {}, {}, meta_for(4, 3, 125), cfg);
        auto x_test_norm = blobs.x_test;
        for (std::size_t r = 0; r < x_test_norm.rows; ++r) {
            for (std::size_t d = 0; d < 4; ++d) {
                x_test_norm.at(r, d) = (x_test_norm.at(r, d) - means[d]) / stds[d];
            }
        }
        const auto pred_norm = mlp_predict(model, x_test_norm);
        bake_input_scaling(model, means, stds);
        const auto pred_raw = mlp_predict(model, blobs.x_test);
        CHECK(pred_norm.labels == pred_raw.labels);
        for (std::size_t i = 0; i < pred_norm.confidence.size(); ++i) {
            CHECK(pred_norm.confidence[i] == doctest::Approx(pred_raw.confidence[i]).epsilon(1e-9));
        }
    }
}

TEST_SUITE("models.gradient_check") {
    TEST_CASE("analytic gradients match central differences on random small models") {
        for (const std::uint64_t seed : {131ULL, 132ULL, 133ULL}) {
            MlpConfig cfg;
            cfg.hidden_dims = {8, 6};
            auto model = init_mlp(5, 3, meta_for(5, 3, seed), cfg);
            Rng rng(seed);
            Matrix x(6, 5);
            std::vector<int> y(6);
            for (auto& v : x.data) {
                v = rng.normal();
            }
            for (auto& label : y) {
                label = static_cast<int>(rng.below(3));
            }
            CHECK(mlp_gradient_check(model, x, y) < 1e-4);
        }
    }

    TEST_CASE("the check is not epsilon-fragile") {
        MlpConfig cfg;
        cfg.hidden_dims = {8};
        auto model = init_mlp(4, 3, meta_for(4, 3, 134), cfg);
        Rng rng(134);
        Matrix x(5, 4);
        std::vector<int> y(5);
        for (auto& v : x.data) {
            v = rng.normal();
        }
        for (auto& label : y) {
            label = static_cast<int>(rng.below(3));
        }
        CHECK(mlp_gradient_check(model, x, y, 1e-4) < 1e-4);
        CHECK(mlp_gradient_check(model, x, y, 1e-5) < 1e-4);
    }

    TEST_CASE("zero weights and zero inputs: output bias gradient is the closed form") {
        MlpConfig cfg;
        cfg.hidden_dims = {6};
        auto model = init_mlp(4, 3, meta_for(4, 3, 135), cfg);
        for (auto& w : model.weights) {
            std::fill(w.data.begin(), w.data.end(), 0.0);
        }
        Matrix x(3, 4); // zeros
        const std::vector<int> y = {0, 1, 1};
        // loss = -log(1/3); d loss / d b_out[c] = mean over batch of (p_c - 1{y=c})
        // p is uniform 1/3; counts: class0 once, class1 twice, class2 never
        CHECK(mlp_gradient_check(model, x, y) < 1e-6);
        // reproduce the analytic value through the public check by verifying
        // the training loss at zero weights
        auto probs = mlp_predict_proba(model, x);
        CHECK(probs.at(0, 0) == doctest::Approx(1.0 / 3.0));
    }

    TEST_CASE("large batches are rejected") {
        MlpConfig cfg;
        cfg.hidden_dims = {6};
        auto model = init_mlp(4, 2, meta_for(4, 2, 136), cfg);
        Matrix x(16, 4);
        std::vector<int> y(16, 0);
        CHECK_THROWS_AS(mlp_gradient_check(model, x, y), ContractError);
    }
}

TEST_SUITE("models.io") {
    TEST_CASE("save, load, save is byte-identical for both model types") {
        TempDir dir;
        const auto blobs = make_blobs(40, 3, 4, 0.4, 141);
        RfConfig rf_cfg;
        rf_cfg.n_trees = 20;
        const Model rf = train_random_forest(blobs.x_train, blobs.y_train, meta_for(4, 3, 141), rf_cfg);
        MlpConfig mlp_cfg;
        mlp_cfg.hidden_dims = {10, 6};
        mlp_cfg.max_epochs = 4;
        const Model mlp =
            train_mlp(blobs.x_train, blobs.y_train, {}, {}, meta_for(4, 3, 141), mlp_cfg);

        for (const Model* model : {&rf, &mlp}) {
            save_model(*model, dir.path / "m.calm-model");
            const auto loaded = load_model(dir.path / "m.calm-model");
            save_model(loaded, dir.path / "m2.calm-model");
            CHECK(read_file(dir.path / "m.calm-model") == read_file(dir.path / "m2.calm-model"));
        }
    }

    TEST_CASE("loaded model predicts identically on 1000 random rows") {
        TempDir dir;
        const auto blobs = make_blobs(40, 3, 4, 0.4, 142);
        RfConfig rf_cfg;
        rf_cfg.n_trees = 30;
        const Model rf = train_random_forest(blobs.x_train, blobs.y_train, meta_for(4, 3, 142), rf_cfg);
        MlpConfig mlp_cfg;
        mlp_cfg.hidden_dims = {10, 6};
        mlp_cfg.max_epochs = 4;
        const Model mlp = train_mlp(blobs.x_train, blobs.y_train, {}, {}, meta_for(4, 3, 142), mlp_cfg);

        Rng rng(142);
        Matrix probe(1000, 4);
        for (auto& v : probe.data) {
            v = rng.normal(0.0, 2.0);
        }
        for (const Model* model : {&rf, &mlp}) {
            save_model(*model, dir.path / "m.calm-model");
            const auto loaded = load_model(dir.path / "m.calm-model");
            const auto a = model_predict(*model, probe);
            const auto b = model_predict(loaded, probe);
            CHECK(a.labels == b.labels);
            for (std::size_t i = 0; i < a.confidence.size(); ++i) {
                CHECK(a.confidence[i] == b.confidence[i]); // bit-exact round trip
            }
        }
    }

    TEST_CASE("bumped format version is an incompatibility error") {
        TempDir dir;
        const auto blobs = make_blobs(20, 2, 2, 0.4, 143);
        RfConfig cfg;
        cfg.n_trees = 3;
        const Model rf = train_random_forest(blobs.x_train, blobs.y_train, meta_for(2, 2, 143), cfg);
        auto text = serialize_model(rf);
        text.replace(text.find("calm-model 1"), 12, "calm-model 2");
        calm::test::write_file(dir.path / "m.calm-model", text);
        CHECK_THROWS_AS(load_model(dir.path / "m.calm-model"), IncompatibilityError);
    }

    TEST_CASE("flipped payload byte is a corruption error") {
        TempDir dir;
        const auto blobs = make_blobs(20, 2, 2, 0.4, 144);
        RfConfig cfg;
        cfg.n_trees = 3;
        const Model rf = train_random_forest(blobs.x_train, blobs.y_train, meta_for(2, 2, 144), cfg);
        auto text = serialize_model(rf);
        const auto pos = text.find("seed 144");
        text[pos + 5] = '9';
        calm::test::write_file(dir.path / "m.calm-model", text);
        CHECK_THROWS_AS(load_model(dir.path / "m.calm-model"), CorruptionError);
    }
}
