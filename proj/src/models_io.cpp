#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "calm/csv.hpp"
#include "calm/error.hpp"
#include "calm/models.hpp"

namespace calm {

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : text) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].find_first_of(", \t\n") != std::string::npos) {
            throw ContractError("name not serializable: '" + names[i] + "'");
        }
        if (i) {
            out += ',';
        }
        out += names[i];
    }
    return out;
}

void append_doubles(std::string& out, std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += csv::format_double(values[i]);
    }
    out += '\n';
}

struct LineReader {
    std::vector<std::string> lines;
    std::size_t pos = 0;

    explicit LineReader(const std::string& text) {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == '\n') {
                if (i > start) {
                    lines.emplace_back(text.substr(start, i - start));
                }
                start = i + 1;
            }
        }
    }

    const std::string& next() {
        if (pos >= lines.size()) {
            throw CorruptionError("model file truncated");
        }
        return lines[pos++];
    }
};

std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') {
            ++j;
        }
        if (j > i) {
            out.push_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ',') {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

double parse_d(const std::string& tok) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw CorruptionError("bad number in model file: '" + tok + "'");
    }
    return v;
}

long long parse_i(const std::string& tok) {
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw CorruptionError("bad integer in model file: '" + tok + "'");
    }
    return v;
}

std::string expect_kv(const std::string& token, std::string_view key) {
    const auto eq = token.find('=');
    if (eq == std::string::npos || token.substr(0, eq) != key) {
        throw CorruptionError("expected '" + std::string(key) + "=...', got '" + token + "'");
    }
    return token.substr(eq + 1);
}

void serialize_meta(std::string& out, const ModelMeta& meta) {
    out += "feature_names " + join_names(meta.feature_names) + "\n";
    out += "classes " + join_names(meta.classes) + "\n";
    out += "seed " + std::to_string(meta.seed) + "\n";
}

ModelMeta read_meta(LineReader& reader) {
    ModelMeta meta;
    auto tok = tokens_of(reader.next());
    if (tok.size() != 2 || tok[0] != "feature_names") {
        throw CorruptionError("expected feature_names line");
    }
    meta.feature_names = split_commas(tok[1]);
    tok = tokens_of(reader.next());
    if (tok.size() != 2 || tok[0] != "classes") {
        throw CorruptionError("expected classes line");
    }
    meta.classes = split_commas(tok[1]);
    tok = tokens_of(reader.next());
    if (tok.size() != 2 || tok[0] != "seed") {
        throw CorruptionError("expected seed line");
    }
    meta.seed = static_cast<std::uint64_t>(parse_i(tok[1]));
    return meta;
}

} // namespace

std::string serialize_model(const Model& model) {
    std::string out;
    out += "calm-model " + std::to_string(kFormatVersion) + "\n";
    if (std::holds_alternative<RandomForestModel>(model)) {
        const auto& rf = std::get<RandomForestModel>(model);
        out += "type random_forest\n";
        serialize_meta(out, rf.meta);
        out += "rf n_trees=" + std::to_string(rf.config.n_trees) +
               " max_depth=" + std::to_string(rf.config.max_depth) +
               " min_samples_leaf=" + std::to_string(rf.config.min_samples_leaf) +
               " features_per_split=" + std::to_string(rf.config.features_per_split) + "\n";
        out += "trees " + std::to_string(rf.trees.size()) + "\n";
        for (const auto& tree : rf.trees) {
            out += "tree " + std::to_string(tree.nodes.size()) + "\n";
            for (const auto& node : tree.nodes) {
                if (node.is_leaf()) {
                    out += "l ";
                    append_doubles(out, node.class_counts);
                } else {
                    out += "n " + std::to_string(node.feature) + ' ' + csv::format_double(node.threshold) +
                           ' ' + std::to_string(node.left) + ' ' + std::to_string(node.right) + "\n";
                }
            }
        }
    } else {
        const auto& mlp = std::get<MlpModel>(model);
        out += "type mlp\n";
        serialize_meta(out, mlp.meta);
        out += "mlp learning_rate=" + csv::format_double(mlp.config.learning_rate) +
               " batch_size=" + std::to_string(mlp.config.batch_size) +
               " max_epochs=" + std::to_string(mlp.config.max_epochs) +
               " patience=" + std::to_string(mlp.config.patience) +
               " bn_momentum=" + csv::format_double(mlp.config.bn_momentum) +
               " bn_epsilon=" + csv::format_double(mlp.config.bn_epsilon) + "\n";
        out += "dims";
        for (const int d : mlp.dims) {
            out += ' ' + std::to_string(d);
        }
        out += '\n';
        for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
            out += "weight " + std::to_string(l) + ' ' + std::to_string(mlp.weights[l].rows) + ' ' +
                   std::to_string(mlp.weights[l].cols) + "\n";
            for (std::size_t r = 0; r < mlp.weights[l].rows; ++r) {
                append_doubles(out, mlp.weights[l].row(r));
            }
            out += "bias " + std::to_string(l) + "\n";
            append_doubles(out, mlp.biases[l]);
        }
        for (std::size_t l = 0; l < mlp.n_hidden(); ++l) {
            out += "bn " + std::to_string(l) + "\n";
            append_doubles(out, mlp.bn_gamma[l]);
            append_doubles(out, mlp.bn_beta[l]);
            append_doubles(out, mlp.bn_mean[l]);
            append_doubles(out, mlp.bn_var[l]);
        }
    }
    out += "checksum " + hex64(fnv1a(out)) + "\n";
    return out;
}

Model deserialize_model(const std::string& text) {
    // the version gate comes first: future versions may change the rest of
    // the envelope, including the checksum algorithm
    const auto first_end = text.find('\n');
    auto tok = tokens_of(text.substr(0, first_end));
    if (tok.size() != 2 || tok[0] != "calm-model") {
        throw CorruptionError("not a calm-model file");
    }
    if (parse_i(tok[1]) != kFormatVersion) {
        throw IncompatibilityError("unsupported model format version " + tok[1] + ", expected " +
                                   std::to_string(kFormatVersion));
    }

    // verify the checksum over everything before the checksum line
    const auto cpos = text.rfind("checksum ");
    if (cpos == std::string::npos) {
        throw CorruptionError("model file has no checksum");
    }
    const std::string payload = text.substr(0, cpos);
    const auto ctokens = tokens_of(text.substr(cpos));
    if (ctokens.size() < 2) {
        throw CorruptionError("malformed checksum line");
    }
    if (hex64(fnv1a(payload)) != ctokens[1]) {
        throw CorruptionError("model file checksum mismatch");
    }

    LineReader reader(payload);
    reader.next(); // version line, already validated
    tok = tokens_of(reader.next());
    if (tok.size() != 2 || tok[0] != "type") {
        throw CorruptionError("expected type line");
    }

    if (tok[1] == "random_forest") {
        RandomForestModel rf;
        rf.meta = read_meta(reader);
        tok = tokens_of(reader.next());
        if (tok.size() != 5 || tok[0] != "rf") {
            throw CorruptionError("expected rf hyperparameter line");
        }
        rf.config.n_trees = static_cast<int>(parse_i(expect_kv(tok[1], "n_trees")));
        rf.config.max_depth = static_cast<int>(parse_i(expect_kv(tok[2], "max_depth")));
        rf.config.min_samples_leaf = static_cast<int>(parse_i(expect_kv(tok[3], "min_samples_leaf")));
        rf.config.features_per_split = static_cast<int>(parse_i(expect_kv(tok[4], "features_per_split")));
        tok = tokens_of(reader.next());
        if (tok.size() != 2 || tok[0] != "trees") {
            throw CorruptionError("expected trees line");
        }
        const auto n_trees = static_cast<std::size_t>(parse_i(tok[1]));
        rf.trees.resize(n_trees);
        for (auto& tree : rf.trees) {
            tok = tokens_of(reader.next());
            if (tok.size() != 2 || tok[0] != "tree") {
                throw CorruptionError("expected tree line");
            }
            const auto n_nodes = static_cast<std::size_t>(parse_i(tok[1]));
            tree.nodes.resize(n_nodes);
            for (auto& node : tree.nodes) {
                tok = tokens_of(reader.next());
                if (tok.empty()) {
                    throw CorruptionError("empty node line");
                }
                if (tok[0] == "n") {
                    if (tok.size() != 5) {
                        throw CorruptionError("malformed internal node");
                    }
                    node.feature = static_cast<int>(parse_i(tok[1]));
                    node.threshold = parse_d(tok[2]);
                    node.left = static_cast<int>(parse_i(tok[3]));
                    node.right = static_cast<int>(parse_i(tok[4]));
                } else if (tok[0] == "l") {
                    node.feature = -1;
                    for (std::size_t i = 1; i < tok.size(); ++i) {
                        node.class_counts.push_back(parse_d(tok[i]));
                    }
                    if (node.class_counts.size() != rf.meta.classes.size()) {
                        throw CorruptionError("leaf class count mismatch");
                    }
                } else {
                    throw CorruptionError("unknown node tag '" + tok[0] + "'");
                }
            }
        }
        return rf;
    }
    if (tok[1] == "mlp") {
        MlpModel mlp;
        mlp.meta = read_meta(reader);
        tok = tokens_of(reader.next());
        if (tok.size() != 7 || tok[0] != "mlp") {
            throw CorruptionError("expected mlp hyperparameter line");
        }
        mlp.config.learning_rate = parse_d(expect_kv(tok[1], "learning_rate"));
        mlp.config.batch_size = static_cast<int>(parse_i(expect_kv(tok[2], "batch_size")));
        mlp.config.max_epochs = static_cast<int>(parse_i(expect_kv(tok[3], "max_epochs")));
        mlp.config.patience = static_cast<int>(parse_i(expect_kv(tok[4], "patience")));
        mlp.config.bn_momentum = parse_d(expect_kv(tok[5], "bn_momentum"));
        mlp.config.bn_epsilon = parse_d(expect_kv(tok[6], "bn_epsilon"));
        tok = tokens_of(reader.next());
        if (tok.size() < 3 || tok[0] != "dims") {
            throw CorruptionError("expected dims line");
        }
        for (std::size_t i = 1; i < tok.size(); ++i) {
            mlp.dims.push_back(static_cast<int>(parse_i(tok[i])));
        }
        mlp.config.hidden_dims.assign(mlp.dims.begin() + 1, mlp.dims.end() - 1);
        const std::size_t n_layers = mlp.dims.size() - 1;
        const auto read_row = [&](std::size_t expected) {
            const auto row_tok = tokens_of(reader.next());
            if (row_tok.size() != expected) {
                throw CorruptionError("wrong value count in model array");
            }
            std::vector<double> values(expected);
            for (std::size_t i = 0; i < expected; ++i) {
                values[i] = parse_d(row_tok[i]);
            }
            return values;
        };
        for (std::size_t l = 0; l < n_layers; ++l) {
            tok = tokens_of(reader.next());
            if (tok.size() != 4 || tok[0] != "weight" || static_cast<std::size_t>(parse_i(tok[1])) != l) {
                throw CorruptionError("expected weight header for layer " + std::to_string(l));
            }
            const auto rows = static_cast<std::size_t>(parse_i(tok[2]));
            const auto cols = static_cast<std::size_t>(parse_i(tok[3]));
            Matrix w(rows, cols);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto vals = read_row(cols);
                std::copy(vals.begin(), vals.end(), w.row(r).begin());
            }
            mlp.weights.push_back(std::move(w));
            tok = tokens_of(reader.next());
            if (tok.size() != 2 || tok[0] != "bias") {
                throw CorruptionError("expected bias header");
            }
            mlp.biases.push_back(read_row(rows));
        }
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            tok = tokens_of(reader.next());
            if (tok.size() != 2 || tok[0] != "bn") {
                throw CorruptionError("expected bn header");
            }
            const auto dim = static_cast<std::size_t>(mlp.dims[l + 1]);
            mlp.bn_gamma.push_back(read_row(dim));
            mlp.bn_beta.push_back(read_row(dim));
            mlp.bn_mean.push_back(read_row(dim));
            mlp.bn_var.push_back(read_row(dim));
        }
        return mlp;
    }
    throw CorruptionError("unknown model type '" + tok[1] + "'");
}

void save_model(const Model& model, const std::filesystem::path& path) {
    csv::write_file_atomic(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open model file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

const ModelMeta& model_meta(const Model& model) {
    if (std::holds_alternative<RandomForestModel>(model)) {
        return std::get<RandomForestModel>(model).meta;
    }
    return std::get<MlpModel>(model).meta;
}

Prediction model_predict(const Model& model, const Matrix& x) {
    if (std::holds_alternative<RandomForestModel>(model)) {
        return rf_predict(std::get<RandomForestModel>(model), x);
    }
    return mlp_predict(std::get<MlpModel>(model), x);
}

} // namespace calm
