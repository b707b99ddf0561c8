#include "calm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>

#include "calm/csv.hpp"
#include "calm/error.hpp"
#include "calm/rng.hpp"
#include "calm/stats.hpp"

namespace calm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> active_for(SensorMode mode) {
    std::vector<std::size_t> idx;
    if (mode != SensorMode::hrv_only) {
        for (std::size_t i = 0; i < kPupilFeatureCount; ++i) {
            idx.push_back(i);
        }
    }
    if (mode != SensorMode::pupil_only) {
        for (std::size_t i = 0; i < kHrvFeatureCount; ++i) {
            idx.push_back(kPupilFeatureCount + i);
        }
    }
    return idx;
}

void fill_pupil_features(FeatureRow& row, const PupilWindowRecord& rec) {
    row.features[0] = rec.basic.mean_mm;
    row.features[1] = rec.basic.std_mm;
    row.features[2] = rec.ipa;
    row.features[3] = rec.basic.auc_mm_s;
    row.features[4] = rec.basic.roc_mm_per_s;
}

void fill_hrv_features(FeatureRow& row, const HrvWindowRecord& rec) {
    row.features[5] = rec.time.rmssd_ms;
    row.features[6] = rec.time.sdnn_ms;
    row.features[7] = rec.time.pnn50_pct;
    row.features[8] = rec.time.mean_rr_ms;
    row.features[9] = rec.time.median_rr_ms;
    row.features[10] = rec.resp_rate_bpm ? *rec.resp_rate_bpm : kNaN;
    if (rec.freq && !rec.freq->saturated) {
        row.features[11] = rec.freq->hf_power_ms2;
        row.features[12] = rec.freq->lf_hf;
    } else if (rec.freq) {
        row.features[11] = rec.freq->hf_power_ms2;
        row.features[12] = kNaN; // saturated ratio is imputed downstream
    } else {
        row.features[11] = kNaN;
        row.features[12] = kNaN;
    }
}

// largest-remainder apportionment of n rows over the three ratios
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double quota = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
        remainder[i] = quota - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < 3; ++i) {
            if (remainder[i] > remainder[best] + 1e-12) {
                best = i;
            }
        }
        ++counts[best];
        remainder[best] = -1.0;
        ++assigned;
    }
    return counts;
}

} // namespace

std::string_view to_string(SensorMode m) {
    switch (m) {
    case SensorMode::pupil_only: return "pupil";
    case SensorMode::hrv_only: return "hrv";
    case SensorMode::multimodal: return "multimodal";
    }
    return "?";
}

SensorMode sensor_mode_from_string(std::string_view s) {
    if (s == "pupil") return SensorMode::pupil_only;
    if (s == "hrv") return SensorMode::hrv_only;
    if (s == "multimodal") return SensorMode::multimodal;
    throw ValidationError("unknown sensor mode '" + std::string(s) + "'");
}

std::vector<std::size_t> FeatureMatrix::active_features() const {
    return active_for(mode);
}

std::vector<std::string> FeatureMatrix::active_feature_names() const {
    std::vector<std::string> names;
    for (const std::size_t i : active_for(mode)) {
        names.emplace_back(kFeatureNames[i]);
    }
    return names;
}

AssembleResult assemble_features(std::span<const PupilWindowRecord> pupil,
                                 std::span<const HrvWindowRecord> hrv, SensorMode mode) {
    AssembleResult result;
    result.matrix.mode = mode;
    auto& rows = result.matrix.rows;

    if (mode == SensorMode::pupil_only) {
        for (const auto& p : pupil) {
            FeatureRow row;
            row.participant_id = p.participant_id;
            row.session_id = p.session_id;
            row.device = Device::tobii;
            row.window_start_s = p.window_start_s;
            row.label = p.task;
            row.light = p.light;
            row.features.fill(kNaN);
            fill_pupil_features(row, p);
            rows.push_back(std::move(row));
        }
    } else if (mode == SensorMode::hrv_only) {
        for (const auto& h : hrv) {
            FeatureRow row;
            row.participant_id = h.participant_id;
            row.session_id = h.session_id;
            row.device = h.device;
            row.window_start_s = h.window_start_s;
            row.label = h.task;
            row.light = h.light;
            row.features.fill(kNaN);
            fill_hrv_features(row, h);
            rows.push_back(std::move(row));
        }
    } else {
        std::map<std::pair<std::string, int>, const PupilWindowRecord*> by_key;
        for (const auto& p : pupil) {
            by_key[{p.session_id, p.window_ordinal}] = &p;
        }
        std::size_t matched_pupil = 0;
        for (const auto& h : hrv) {
            const auto it = by_key.find({h.session_id, h.window_ordinal});
            if (it == by_key.end()) {
                ++result.dropped_windows;
                continue;
            }
            ++matched_pupil;
            const auto& p = *it->second;
            FeatureRow row;
            row.participant_id = h.participant_id;
            row.session_id = h.session_id;
            row.device = h.device;
            row.window_start_s = h.window_start_s;
            row.label = h.task;
            row.light = h.light;
            row.features.fill(kNaN);
            fill_pupil_features(row, p);
            fill_hrv_features(row, h);
            rows.push_back(std::move(row));
        }
        result.dropped_windows += pupil.size() - matched_pupil;
    }

    if (rows.empty()) {
        throw AssemblyError("feature assembly produced zero rows");
    }
    return result;
}

DatasetSplit split_dataset(const FeatureMatrix& matrix, std::array<double, 3> ratios,
                           std::uint64_t seed, SplitBy by) {
    const std::size_t n = matrix.rows.size();
    if (n < 10) {
        throw ContractError("split needs at least 10 rows, got " + std::to_string(n));
    }
    const double ratio_sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(ratio_sum - 1.0) > 1e-9) {
        throw ContractError("split ratios must sum to 1");
    }

    DatasetSplit split;
    split.seed = seed;
    Rng rng(derive_seed(seed, "split", 0));

    if (by == SplitBy::participant) {
        std::vector<std::string> participants;
        std::map<std::string, std::size_t> rows_per;
        for (const auto& row : matrix.rows) {
            if (rows_per.emplace(row.participant_id, 0).second) {
                participants.push_back(row.participant_id);
            }
            ++rows_per[row.participant_id];
        }
        std::sort(participants.begin(), participants.end());
        rng.shuffle(participants);
        std::map<std::string, std::size_t> destination; // 0 train, 1 val, 2 test
        std::size_t rows_seen = 0;
        for (const auto& pid : participants) {
            const double frac = static_cast<double>(rows_seen) / static_cast<double>(n);
            std::size_t dest = 2;
            if (frac < ratios[0]) {
                dest = 0;
            } else if (frac < ratios[0] + ratios[1]) {
                dest = 1;
            }
            destination[pid] = dest;
            rows_seen += rows_per[pid];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t dest = destination[matrix.rows[i].participant_id];
            (dest == 0 ? split.train : dest == 1 ? split.val : split.test).push_back(i);
        }
        return split;
    }

    std::map<Task, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        groups[matrix.rows[i].label].push_back(i);
    }
    bool stratify = true;
    for (const auto& [task, indices] : groups) {
        if (indices.size() < 3) {
            std::fprintf(stderr, "warning: class '%s' has %zu rows; falling back to unstratified split\n",
                         std::string(to_string(task)).c_str(), indices.size());
            stratify = false;
        }
    }
    if (!stratify) {
        groups.clear();
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        groups[Task::rest] = std::move(all);
    }

    for (auto& [task, indices] : groups) {
        rng.shuffle(indices);
        const auto counts = apportion(indices.size(), ratios);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < counts[0]; ++i) {
            split.train.push_back(indices[pos++]);
        }
        for (std::size_t i = 0; i < counts[1]; ++i) {
            split.val.push_back(indices[pos++]);
        }
        for (std::size_t i = 0; i < counts[2]; ++i) {
            split.test.push_back(indices[pos++]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::string ScenarioSpec::label() const {
    std::string out = "train-";
    out += train_light == TrainLight::light ? "light" : "all";
    out += "_test-";
    out += test_light == TestLight::light ? "light" : test_light == TestLight::dark ? "dark" : "all";
    return out;
}

std::vector<ScenarioSpec> default_scenarios() {
    using TL = ScenarioSpec::TrainLight;
    using TE = ScenarioSpec::TestLight;
    return {
        {TL::light, TE::light},
        {TL::light, TE::dark},
        {TL::all, TE::light},
        {TL::all, TE::dark},
        {TL::all, TE::all},
    };
}

ScenarioSpec scenario_from_strings(std::string_view train, std::string_view test) {
    ScenarioSpec spec;
    if (train == "light") {
        spec.train_light = ScenarioSpec::TrainLight::light;
    } else if (train == "all") {
        spec.train_light = ScenarioSpec::TrainLight::all;
    } else {
        throw ValidationError("scenario train condition must be light or all, got '" + std::string(train) + "'");
    }
    if (test == "light") {
        spec.test_light = ScenarioSpec::TestLight::light;
    } else if (test == "dark") {
        spec.test_light = ScenarioSpec::TestLight::dark;
    } else if (test == "all") {
        spec.test_light = ScenarioSpec::TestLight::all;
    } else {
        throw ValidationError("scenario test condition must be light, dark or all, got '" + std::string(test) + "'");
    }
    return spec;
}

ScenarioRows scenario_select(const FeatureMatrix& matrix, const DatasetSplit& split,
                             const ScenarioSpec& spec) {
    const auto keep_train = [&](std::size_t i) {
        return spec.train_light == ScenarioSpec::TrainLight::all || matrix.rows[i].light == Light::light;
    };
    const auto keep_test = [&](std::size_t i) {
        switch (spec.test_light) {
        case ScenarioSpec::TestLight::all: return true;
        case ScenarioSpec::TestLight::light: return matrix.rows[i].light == Light::light;
        case ScenarioSpec::TestLight::dark: return matrix.rows[i].light == Light::dark;
        }
        return true;
    };
    ScenarioRows rows;
    std::copy_if(split.train.begin(), split.train.end(), std::back_inserter(rows.train), keep_train);
    std::copy_if(split.val.begin(), split.val.end(), std::back_inserter(rows.val), keep_train);
    std::copy_if(split.test.begin(), split.test.end(), std::back_inserter(rows.test), keep_test);
    if (rows.train.empty() || rows.test.empty()) {
        throw ScenarioError("scenario " + spec.label() + " leaves an empty train or test side");
    }
    return rows;
}

std::string_view to_string(LabelScheme s) {
    return s == LabelScheme::three_class ? "three_class" : "binary";
}

LabelScheme label_scheme_from_string(std::string_view s) {
    if (s == "three_class") return LabelScheme::three_class;
    if (s == "binary") return LabelScheme::binary;
    throw ValidationError("unknown label scheme '" + std::string(s) + "'");
}

std::vector<std::string> class_names(LabelScheme scheme) {
    if (scheme == LabelScheme::three_class) {
        return {"rest", "cl1", "cl2"};
    }
    return {"rest", "load"};
}

int encode_label(Task task, LabelScheme scheme) {
    if (scheme == LabelScheme::three_class) {
        return static_cast<int>(task);
    }
    return task == Task::rest ? 0 : 1;
}

Imputer fit_imputer(const FeatureMatrix& matrix, std::span<const std::size_t> rows) {
    const auto active = matrix.active_features();
    Imputer imp;
    imp.means.resize(active.size(), 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const std::size_t r : rows) {
            const double v = matrix.rows[r].features[active[a]];
            if (std::isfinite(v)) {
                sum += v;
                ++count;
            }
        }
        imp.means[a] = count > 0 ? sum / static_cast<double>(count) : 0.0;
    }
    return imp;
}

Normalizer fit_normalizer(const Matrix& x) {
    Normalizer norm;
    norm.means.resize(x.cols, 0.0);
    norm.stds.resize(x.cols, 1.0);
    for (std::size_t c = 0; c < x.cols; ++c) {
        std::vector<double> column(x.rows);
        for (std::size_t r = 0; r < x.rows; ++r) {
            column[r] = x.at(r, c);
        }
        norm.means[c] = stats::mean(column);
        const double sd = stats::sample_std(column);
        norm.stds[c] = sd > 1e-12 ? sd : 1.0;
    }
    return norm;
}

void apply_normalizer(const Normalizer& norm, Matrix& x) {
    if (norm.means.size() != x.cols) {
        throw ContractError("normalizer dimension mismatch");
    }
    for (std::size_t r = 0; r < x.rows; ++r) {
        auto row = x.row(r);
        for (std::size_t c = 0; c < x.cols; ++c) {
            row[c] = (row[c] - norm.means[c]) / norm.stds[c];
        }
    }
}

DesignMatrix materialize(const FeatureMatrix& matrix, std::span<const std::size_t> rows,
                         LabelScheme scheme, const Imputer& imputer) {
    const auto active = matrix.active_features();
    if (imputer.means.size() != active.size()) {
        throw ContractError("imputer does not match the sensor mode");
    }
    DesignMatrix dm;
    dm.feature_names = matrix.active_feature_names();
    dm.classes = class_names(scheme);
    dm.x = Matrix(rows.size(), active.size());
    dm.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = matrix.rows[rows[i]];
        dm.y[i] = encode_label(row.label, scheme);
        for (std::size_t a = 0; a < active.size(); ++a) {
            const double v = row.features[active[a]];
            dm.x.at(i, a) = std::isfinite(v) ? v : imputer.means[a];
        }
    }
    return dm;
}

void write_features_csv(const FeatureMatrix& matrix, const std::filesystem::path& path) {
    std::string out = "participant_id,session_id,device,window_start_s,task,light";
    for (const auto& name : kFeatureNames) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (const auto& row : matrix.rows) {
        out += row.participant_id;
        out += ',';
        out += row.session_id;
        out += ',';
        out += to_string(row.device);
        out += ',';
        out += csv::format_double(row.window_start_s);
        out += ',';
        out += to_string(row.label);
        out += ',';
        out += to_string(row.light);
        for (const double v : row.features) {
            out += ',';
            if (std::isfinite(v)) {
                out += csv::format_double(v);
            }
        }
        out += '\n';
    }
    csv::write_file_atomic(path, out);
}

FeatureMatrix read_features_csv(const std::filesystem::path& path, SensorMode mode) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) {
        throw DataError("features file is empty: " + path.string());
    }
    std::string header = "participant_id,session_id,device,window_start_s,task,light";
    for (const auto& name : kFeatureNames) {
        header += ',';
        header += name;
    }
    if (lines.front().text != header) {
        throw ParseError("line " + std::to_string(lines.front().number) +
                         ": features header does not match the canonical schema");
    }
    FeatureMatrix matrix;
    matrix.mode = mode;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& ln = lines[i];
        const auto fields = csv::split_line(ln.text);
        if (fields.size() != 6 + kFeatureNames.size()) {
            throw ParseError("line " + std::to_string(ln.number) + ": expected " +
                             std::to_string(6 + kFeatureNames.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        FeatureRow row;
        row.participant_id = fields[0];
        row.session_id = fields[1];
        row.device = device_from_string(fields[2], ln.number);
        row.window_start_s = csv::parse_double(fields[3], ln.number);
        row.label = task_from_string(fields[4], ln.number);
        row.light = light_from_string(fields[5], ln.number);
        for (std::size_t f = 0; f < kFeatureNames.size(); ++f) {
            const auto& cell = fields[6 + f];
            row.features[f] = cell.empty() ? kNaN : csv::parse_double(cell, ln.number);
        }
        matrix.rows.push_back(std::move(row));
    }
    if (matrix.rows.empty()) {
        throw DataError("features file has no rows: " + path.string());
    }
    return matrix;
}

} // namespace calm
