#include <algorithm>
#include <cmath>
#include <numeric>

#include "calm/error.hpp"
#include "calm/models.hpp"
#include "calm/rng.hpp"

namespace calm {

namespace {

// z = a * W^T + bias, W stored out x in
Matrix linear_forward(const Matrix& a, const Matrix& w, const std::vector<double>& bias) {
    Matrix z(a.rows, w.rows);
    for (std::size_t b = 0; b < a.rows; ++b) {
        const auto arow = a.row(b);
        auto zrow = z.row(b);
        for (std::size_t o = 0; o < w.rows; ++o) {
            const auto wrow = w.row(o);
            double acc = bias[o];
            for (std::size_t i = 0; i < w.cols; ++i) {
                acc += arow[i] * wrow[i];
            }
            zrow[o] = acc;
        }
    }
    return z;
}

struct ForwardCache {
    std::vector<Matrix> act;  // act[0] = input, act[l+1] = post-ReLU of layer l
    std::vector<Matrix> z;    // linear outputs per hidden layer
    std::vector<Matrix> xhat; // normalized per hidden layer
    std::vector<std::vector<double>> mu;
    std::vector<std::vector<double>> var;
    Matrix probs;
    double loss = 0.0;
};

// Train-mode forward: batch statistics; optionally updates running stats.
ForwardCache forward_train(MlpModel& model, const Matrix& x, const std::vector<int>& y,
                           bool update_running) {
    const std::size_t n_hidden = model.n_hidden();
    const std::size_t batch = x.rows;
    ForwardCache cache;
    cache.act.resize(n_hidden + 1);
    cache.z.resize(n_hidden);
    cache.xhat.resize(n_hidden);
    cache.mu.resize(n_hidden);
    cache.var.resize(n_hidden);
    cache.act[0] = x;

    for (std::size_t l = 0; l < n_hidden; ++l) {
        cache.z[l] = linear_forward(cache.act[l], model.weights[l], model.biases[l]);
        const std::size_t dim = cache.z[l].cols;
        auto& mu = cache.mu[l];
        auto& var = cache.var[l];
        mu.assign(dim, 0.0);
        var.assign(dim, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            const auto zrow = cache.z[l].row(b);
            for (std::size_t j = 0; j < dim; ++j) {
                mu[j] += zrow[j];
            }
        }
        for (double& m : mu) {
            m /= static_cast<double>(batch);
        }
        for (std::size_t b = 0; b < batch; ++b) {
            const auto zrow = cache.z[l].row(b);
            for (std::size_t j = 0; j < dim; ++j) {
                const double d = zrow[j] - mu[j];
                var[j] += d * d;
            }
        }
        for (double& v : var) {
            v /= static_cast<double>(batch); // biased batch variance
        }
        if (update_running && batch > 1) {
            const double m = model.config.bn_momentum;
            const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
            for (std::size_t j = 0; j < dim; ++j) {
                model.bn_mean[l][j] = (1.0 - m) * model.bn_mean[l][j] + m * mu[j];
                model.bn_var[l][j] = (1.0 - m) * model.bn_var[l][j] + m * var[j] * unbias;
            }
        }
        cache.xhat[l] = Matrix(batch, dim);
        cache.act[l + 1] = Matrix(batch, dim);
        for (std::size_t b = 0; b < batch; ++b) {
            const auto zrow = cache.z[l].row(b);
            auto xrow = cache.xhat[l].row(b);
            auto arow = cache.act[l + 1].row(b);
            for (std::size_t j = 0; j < dim; ++j) {
                const double inv_std = 1.0 / std::sqrt(var[j] + model.config.bn_epsilon);
                xrow[j] = (zrow[j] - mu[j]) * inv_std;
                const double h = model.bn_gamma[l][j] * xrow[j] + model.bn_beta[l][j];
                arow[j] = h > 0.0 ? h : 0.0;
            }
        }
    }

    Matrix logits = linear_forward(cache.act[n_hidden], model.weights[n_hidden], model.biases[n_hidden]);
    cache.probs = Matrix(batch, logits.cols);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto lrow = logits.row(b);
        auto prow = cache.probs.row(b);
        const double mx = *std::max_element(lrow.begin(), lrow.end());
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c) {
            prow[c] = std::exp(lrow[c] - mx);
            denom += prow[c];
        }
        for (std::size_t c = 0; c < logits.cols; ++c) {
            prow[c] /= denom;
        }
        loss -= std::log(std::max(prow[static_cast<std::size_t>(y[b])], 1e-300));
    }
    cache.loss = loss / static_cast<double>(batch);
    return cache;
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    std::vector<std::vector<double>> bn_gamma;
    std::vector<std::vector<double>> bn_beta;
};

Gradients backward(const MlpModel& model, const ForwardCache& cache, const std::vector<int>& y) {
    const std::size_t n_hidden = model.n_hidden();
    const std::size_t batch = cache.act[0].rows;
    const double inv_batch = 1.0 / static_cast<double>(batch);

    Gradients g;
    g.weights.resize(model.weights.size());
    g.biases.resize(model.biases.size());
    g.bn_gamma.resize(n_hidden);
    g.bn_beta.resize(n_hidden);

    // softmax cross-entropy
    Matrix delta = cache.probs;
    for (std::size_t b = 0; b < batch; ++b) {
        delta.at(b, static_cast<std::size_t>(y[b])) -= 1.0;
        for (std::size_t c = 0; c < delta.cols; ++c) {
            delta.at(b, c) *= inv_batch;
        }
    }

    for (std::size_t li = model.weights.size(); li-- > 0;) {
        const Matrix& w = model.weights[li];
        const Matrix& input = cache.act[li];
        // parameter gradients
        g.weights[li] = Matrix(w.rows, w.cols);
        g.biases[li].assign(w.rows, 0.0);
        for (std::size_t o = 0; o < w.rows; ++o) {
            auto gw = g.weights[li].row(o);
            double gb = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const double d = delta.at(b, o);
                gb += d;
                const auto in_row = input.row(b);
                for (std::size_t i = 0; i < w.cols; ++i) {
                    gw[i] += d * in_row[i];
                }
            }
            g.biases[li][o] = gb;
        }
        if (li == 0) {
            break;
        }
        // input gradient
        Matrix dact(batch, w.cols);
        for (std::size_t b = 0; b < batch; ++b) {
            auto out = dact.row(b);
            const auto drow = delta.row(b);
            for (std::size_t o = 0; o < w.rows; ++o) {
                const double d = drow[o];
                const auto wrow = w.row(o);
                for (std::size_t i = 0; i < w.cols; ++i) {
                    out[i] += d * wrow[i];
                }
            }
        }

        // batch-norm + ReLU backward for hidden layer li-1
        const std::size_t l = li - 1;
        const std::size_t dim = dact.cols;
        g.bn_gamma[l].assign(dim, 0.0);
        g.bn_beta[l].assign(dim, 0.0);

        std::vector<double> sum_dxhat(dim, 0.0);
        std::vector<double> sum_dxhat_xc(dim, 0.0); // sum of dxhat * (z - mu)
        Matrix dxhat(batch, dim);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < dim; ++j) {
                const double relu_grad = cache.act[l + 1].at(b, j) > 0.0 ? 1.0 : 0.0;
                const double dh = dact.at(b, j) * relu_grad;
                g.bn_gamma[l][j] += dh * cache.xhat[l].at(b, j);
                g.bn_beta[l][j] += dh;
                dxhat.at(b, j) = dh * model.bn_gamma[l][j];
                sum_dxhat[j] += dxhat.at(b, j);
                sum_dxhat_xc[j] += dxhat.at(b, j) * (cache.z[l].at(b, j) - cache.mu[l][j]);
            }
        }
        delta = Matrix(batch, dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double inv_std = 1.0 / std::sqrt(cache.var[l][j] + model.config.bn_epsilon);
            const double dvar = sum_dxhat_xc[j] * (-0.5) * inv_std * inv_std * inv_std;
            const double dmu = -inv_std * sum_dxhat[j];
            for (std::size_t b = 0; b < batch; ++b) {
                const double xc = cache.z[l].at(b, j) - cache.mu[l][j];
                delta.at(b, j) = dxhat.at(b, j) * inv_std +
                                 (dvar * 2.0 * xc + dmu) / static_cast<double>(batch);
            }
        }
    }
    return g;
}

// flattened views over every trainable tensor, in a fixed order
std::vector<std::span<double>> parameter_views(MlpModel& m) {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        out.emplace_back(m.weights[l].data);
        out.emplace_back(m.biases[l]);
    }
    for (std::size_t l = 0; l < m.n_hidden(); ++l) {
        out.emplace_back(m.bn_gamma[l]);
        out.emplace_back(m.bn_beta[l]);
    }
    return out;
}

std::vector<std::span<double>> gradient_views(Gradients& g) {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        out.emplace_back(g.weights[l].data);
        out.emplace_back(g.biases[l]);
    }
    for (std::size_t l = 0; l < g.bn_gamma.size(); ++l) {
        out.emplace_back(g.bn_gamma[l]);
        out.emplace_back(g.bn_beta[l]);
    }
    return out;
}

double accuracy_of(const MlpModel& model, const Matrix& x, const std::vector<int>& y) {
    if (x.rows == 0) {
        return 0.0;
    }
    const auto pred = mlp_predict(model, x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (pred.labels[i] == y[i]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

} // namespace

MlpModel init_mlp(int input_dim, int n_classes, const ModelMeta& meta, const MlpConfig& config) {
    MlpModel m;
    m.config = config;
    m.meta = meta;
    m.dims.push_back(input_dim);
    for (const int h : config.hidden_dims) {
        m.dims.push_back(h);
    }
    m.dims.push_back(n_classes);

    Rng rng(derive_seed(meta.seed, "mlp-init", 0));
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        const auto in = static_cast<std::size_t>(m.dims[l]);
        const auto out = static_cast<std::size_t>(m.dims[l + 1]);
        Matrix w(out, in);
        const double scale = std::sqrt(2.0 / static_cast<double>(in)); // He init
        for (double& v : w.data) {
            v = scale * rng.normal();
        }
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    for (std::size_t l = 0; l < m.n_hidden(); ++l) {
        const auto dim = static_cast<std::size_t>(m.dims[l + 1]);
        m.bn_gamma.emplace_back(dim, 1.0);
        m.bn_beta.emplace_back(dim, 0.0);
        m.bn_mean.emplace_back(dim, 0.0);
        m.bn_var.emplace_back(dim, 1.0);
    }
    return m;
}

MlpModel train_mlp(const Matrix& x, const std::vector<int>& y, const Matrix& x_val,
                   const std::vector<int>& y_val, const ModelMeta& meta, const MlpConfig& config) {
    if (x.rows != y.size()) {
        throw ContractError("X/y row mismatch");
    }
    if (x.rows < static_cast<std::size_t>(config.batch_size)) {
        throw ContractError("training set smaller than one batch");
    }
    if (meta.feature_names.size() != x.cols) {
        throw ContractError("feature_names do not match X columns");
    }

    MlpModel model = init_mlp(static_cast<int>(x.cols), static_cast<int>(meta.classes.size()), meta, config);

    // Adam state per parameter tensor
    auto params = parameter_views(model);
    std::vector<std::vector<double>> adam_m(params.size());
    std::vector<std::vector<double>> adam_v(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
        adam_m[p].assign(params[p].size(), 0.0);
        adam_v[p].assign(params[p].size(), 0.0);
    }
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;
    long long step = 0;

    Rng shuffle_rng(derive_seed(meta.seed, "mlp-shuffle", 0));
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);

    const bool has_val = x_val.rows > 0;
    MlpModel best = model;
    double best_acc = -1.0;
    int stale_epochs = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < x.rows; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(x.rows, start + static_cast<std::size_t>(config.batch_size));
            if (end - start < 2) {
                break; // batch statistics need at least 2 rows
            }
            Matrix xb(end - start, x.cols);
            std::vector<int> yb(end - start);
            for (std::size_t i = start; i < end; ++i) {
                std::copy(x.row(order[i]).begin(), x.row(order[i]).end(), xb.row(i - start).begin());
                yb[i - start] = y[order[i]];
            }
            auto cache = forward_train(model, xb, yb, true);
            if (!std::isfinite(cache.loss)) {
                throw TrainingError("loss diverged at epoch " + std::to_string(epoch));
            }
            auto grads = backward(model, cache, yb);
            auto gviews = gradient_views(grads);
            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (std::size_t p = 0; p < params.size(); ++p) {
                for (std::size_t i = 0; i < params[p].size(); ++i) {
                    const double grad = gviews[p][i];
                    adam_m[p][i] = kBeta1 * adam_m[p][i] + (1.0 - kBeta1) * grad;
                    adam_v[p][i] = kBeta2 * adam_v[p][i] + (1.0 - kBeta2) * grad * grad;
                    const double mhat = adam_m[p][i] / bc1;
                    const double vhat = adam_v[p][i] / bc2;
                    params[p][i] -= config.learning_rate * mhat / (std::sqrt(vhat) + kAdamEps);
                }
            }
        }

        const double acc = has_val ? accuracy_of(model, x_val, y_val) : accuracy_of(model, x, y);
        if (acc > best_acc) {
            best_acc = acc;
            best = model;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= config.patience) {
                break;
            }
        }
    }
    return best;
}

Matrix mlp_predict_proba(const MlpModel& model, const Matrix& x) {
    if (x.cols != model.meta.feature_names.size()) {
        throw ContractError("prediction matrix has " + std::to_string(x.cols) + " columns, model expects " +
                            std::to_string(model.meta.feature_names.size()));
    }
    const std::size_t n_hidden = model.n_hidden();
    Matrix act = x;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        Matrix z = linear_forward(act, model.weights[l], model.biases[l]);
        for (std::size_t b = 0; b < z.rows; ++b) {
            auto zrow = z.row(b);
            for (std::size_t j = 0; j < z.cols; ++j) {
                const double inv_std = 1.0 / std::sqrt(model.bn_var[l][j] + model.config.bn_epsilon);
                const double xhat = (zrow[j] - model.bn_mean[l][j]) * inv_std;
                const double h = model.bn_gamma[l][j] * xhat + model.bn_beta[l][j];
                zrow[j] = h > 0.0 ? h : 0.0;
            }
        }
        act = std::move(z);
    }
    Matrix logits = linear_forward(act, model.weights[n_hidden], model.biases[n_hidden]);
    for (std::size_t b = 0; b < logits.rows; ++b) {
        auto row = logits.row(b);
        const double mx = *std::max_element(row.begin(), row.end());
        double denom = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            denom += v;
        }
        for (double& v : row) {
            v /= denom;
        }
    }
    return logits;
}

Prediction mlp_predict(const MlpModel& model, const Matrix& x) {
    const Matrix probs = mlp_predict_proba(model, x);
    Prediction out;
    out.labels.resize(x.rows);
    out.confidence.resize(x.rows);
    for (std::size_t b = 0; b < probs.rows; ++b) {
        const auto row = probs.row(b);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols; ++c) {
            if (row[c] > row[best]) {
                best = c;
            }
        }
        out.labels[b] = static_cast<int>(best);
        out.confidence[b] = row[best];
    }
    return out;
}

void bake_input_scaling(MlpModel& model, std::span<const double> means, std::span<const double> stds) {
    Matrix& w = model.weights.front();
    if (means.size() != w.cols || stds.size() != w.cols) {
        throw ContractError("scaling dimension does not match the input layer");
    }
    auto& b = model.biases.front();
    for (std::size_t o = 0; o < w.rows; ++o) {
        auto row = w.row(o);
        for (std::size_t i = 0; i < w.cols; ++i) {
            row[i] /= stds[i];
            b[o] -= row[i] * means[i];
        }
    }
}

double mlp_gradient_check(MlpModel& model, const Matrix& x, const std::vector<int>& y, double epsilon) {
    if (x.rows > 8) {
        throw ContractError("gradient check is meant for small batches (<= 8 rows)");
    }
    auto cache = forward_train(model, x, y, false);
    auto grads = backward(model, cache, y);
    auto params = parameter_views(model);
    auto gviews = gradient_views(grads);

    const auto loss_at = [&]() {
        return forward_train(model, x, y, false).loss;
    };

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double saved = params[p][i];
            params[p][i] = saved + epsilon;
            const double up = loss_at();
            params[p][i] = saved - epsilon;
            const double down = loss_at();
            params[p][i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = gviews[p][i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(analytic - numeric) / denom);
        }
    }
    return worst;
}

} // namespace calm
