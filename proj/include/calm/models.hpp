#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "calm/matrix.hpp"

namespace calm {

struct RfConfig {
    int n_trees = 100;
    int max_depth = 0; // 0 = unbounded
    int min_samples_leaf = 1;
    int features_per_split = 0; // 0 = floor(sqrt(n_features))
};

struct MlpConfig {
    std::vector<int> hidden_dims = {256, 128, 64};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 20;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
};

/// Shared identity of a trained model: the feature schema it consumes, the
/// class set it emits and the seed it was trained with.
struct ModelMeta {
    std::vector<std::string> feature_names;
    std::vector<std::string> classes;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> class_counts; // populated on leaves

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

struct RandomForestModel {
    RfConfig config;
    ModelMeta meta;
    std::vector<DecisionTree> trees;
};

struct MlpModel {
    MlpConfig config;
    ModelMeta meta;
    std::vector<int> dims; // input, hidden..., n_classes
    std::vector<Matrix> weights; // per layer, out x in
    std::vector<std::vector<double>> biases;
    // batch-norm parameters and running statistics, per hidden layer
    std::vector<std::vector<double>> bn_gamma;
    std::vector<std::vector<double>> bn_beta;
    std::vector<std::vector<double>> bn_mean;
    std::vector<std::vector<double>> bn_var;

    std::size_t n_layers() const { return weights.size(); }
    std::size_t n_hidden() const { return weights.empty() ? 0 : weights.size() - 1; }
};

struct Prediction {
    std::vector<int> labels;
    std::vector<double> confidence;
};

/// Seeded bootstrap + Gini decision trees. Deterministic: identical
/// (X, y, seed, config) give byte-identical serialized forests.
RandomForestModel train_random_forest(const Matrix& x, const std::vector<int>& y, const ModelMeta& meta,
                                      const RfConfig& config = {});

/// Majority vote over trees; confidence is the vote fraction for the
/// winning class. Ties go to the lowest class index.
Prediction rf_predict(const RandomForestModel& model, const Matrix& x);

/// Mean decrease in Gini impurity, weighted by node sample counts,
/// normalized to sum 1.
std::vector<double> rf_feature_importance(const RandomForestModel& model);

/// Fresh He-initialized network (exposed for tests and the gradient check).
MlpModel init_mlp(int input_dim, int n_classes, const ModelMeta& meta, const MlpConfig& config = {});

/// Minibatch Adam on softmax cross-entropy with batch normalization.
/// Early-stops on validation accuracy; returns the best-validation weights.
/// Falls back to training accuracy when the validation set is empty.
MlpModel train_mlp(const Matrix& x, const std::vector<int>& y, const Matrix& x_val,
                   const std::vector<int>& y_val, const ModelMeta& meta, const MlpConfig& config = {});

/// Softmax probabilities, one row per input row (inference mode: running
/// batch-norm statistics).
Matrix mlp_predict_proba(const MlpModel& model, const Matrix& x);

Prediction mlp_predict(const MlpModel& model, const Matrix& x);

/// Max over parameters of the relative disagreement between analytic and
/// central finite-difference gradients on one batch (train-mode forward).
double mlp_gradient_check(MlpModel& model, const Matrix& x, const std::vector<int>& y,
                          double epsilon = 1e-5);

/// Folds per-feature z-score statistics into the first layer so the model
/// consumes raw (unnormalized) features.
void bake_input_scaling(MlpModel& model, std::span<const double> means, std::span<const double> stds);

using Model = std::variant<RandomForestModel, MlpModel>;

std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& text);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

const ModelMeta& model_meta(const Model& model);
Prediction model_predict(const Model& model, const Matrix& x);

} // namespace calm
