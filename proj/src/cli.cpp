#include "calm/cli.hpp"

#include <algorithm>
#include <cstdio>
#include "calm/stats.hpp"
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "calm/config.hpp"
#include "calm/csv.hpp"
#include "calm/eval.hpp"
#include "calm/synth.hpp"

namespace calm::cli {

namespace {

struct Extraction {
    std::vector<PupilWindowRecord> pupil;
    std::vector<HrvWindowRecord> hrv;
    std::size_t dropped_windows = 0;
};

Extraction extract_all(const std::vector<SessionManifest>& manifests, const RunConfig& cfg) {
    std::vector<SessionManifest> sorted = manifests;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return std::tie(a.session_id, a.device) < std::tie(b.session_id, b.device);
    });

    Extraction out;
    for (const auto& m : sorted) {
        const auto raw = load_channel(m);
        if (m.device == Device::tobii) {
            PupilConfig pc = cfg.pupil;
            pc.filter_enabled = cfg.filter_enabled;
            pc.filter_order = cfg.filter_order;
            pc.filter_cutoff_hz = cfg.filter_cutoff_hz;
            const auto trace = preprocess_pupil(raw, pc);
            const auto windows = sliding_windows(trace.signal, cfg.window);
            for (std::size_t k = 0; k < windows.size(); ++k) {
                const auto& view = windows[k];
                if (trace.gaps.overlaps(view.start_s, view.start_s + cfg.window.length_s)) {
                    ++out.dropped_windows;
                    continue;
                }
                PupilWindowRecord rec;
                rec.participant_id = m.participant_id;
                rec.session_id = m.session_id;
                rec.task = m.task;
                rec.light = m.light;
                rec.window_ordinal = static_cast<int>(k);
                rec.window_start_s = view.start_s;
                rec.basic = extract_pupil_basic(view);
                rec.ipa = compute_ipa(view, pc.ipa);
                out.pupil.push_back(std::move(rec));
            }
        } else {
            const auto ecg = preprocess_ecg(raw, m.device, m.nominal_rate_hz, cfg.ecg);
            const auto beats = detect_r_peaks(ecg, cfg.detector);
            const auto rr = rr_from_peaks(beats, cfg.rr_bounds);
            const auto windows = sliding_windows(ecg.signal, cfg.window);
            for (std::size_t k = 0; k < windows.size(); ++k) {
                const auto& view = windows[k];
                const auto rr_window = slice_rr(rr, view.start_s, cfg.window.length_s);
                if (rr_window.intervals_ms.size() < 3) {
                    ++out.dropped_windows;
                    continue;
                }
                HrvWindowRecord rec;
                rec.participant_id = m.participant_id;
                rec.session_id = m.session_id;
                rec.device = m.device;
                rec.task = m.task;
                rec.light = m.light;
                rec.window_ordinal = static_cast<int>(k);
                rec.window_start_s = view.start_s;
                rec.time = hrv_time_features(rr_window);
                try {
                    rec.freq = hrv_freq_features(rr_window, cfg.spectral);
                } catch (const DegenerateSignalError&) {
                    rec.freq = std::nullopt;
                }
                std::vector<double> window_beats;
                for (const double b : beats) {
                    if (b >= view.start_s && b < view.start_s + cfg.window.length_s) {
                        window_beats.push_back(b);
                    }
                }
                try {
                    rec.resp_rate_bpm = respiration_rate(ecg, window_beats, cfg.spectral);
                } catch (const DegenerateSignalError&) {
                    rec.resp_rate_bpm = std::nullopt;
                }
                out.hrv.push_back(std::move(rec));
            }
        }
    }
    return out;
}

FeatureMatrix with_mode(const FeatureMatrix& matrix, SensorMode mode) {
    FeatureMatrix out;
    out.mode = mode;
    out.rows = matrix.rows;
    return out;
}

struct CellResult {
    double accuracy = 0.0;
    EceResult ece;
    ConfusionMatrix confusion;
    std::vector<double> importances;
};

CellResult run_one(const FeatureMatrix& matrix, const RunConfig& cfg, const ScenarioSpec& spec,
                   std::uint64_t seed) {
    const auto split = split_dataset(matrix, cfg.split_ratios, seed, cfg.split_by);
    const auto rows = scenario_select(matrix, split, spec);
    const auto imputer = fit_imputer(matrix, rows.train);
    auto dm_train = materialize(matrix, rows.train, cfg.label_scheme, imputer);
    auto dm_val = materialize(matrix, rows.val, cfg.label_scheme, imputer);
    auto dm_test = materialize(matrix, rows.test, cfg.label_scheme, imputer);

    ModelMeta meta;
    meta.feature_names = dm_train.feature_names;
    meta.classes = dm_train.classes;
    meta.seed = seed;

    Prediction pred;
    CellResult result;
    if (cfg.classifier == Classifier::rf) {
        const auto model = train_random_forest(dm_train.x, dm_train.y, meta, cfg.rf);
        pred = rf_predict(model, dm_test.x);
        result.importances = rf_feature_importance(model);
    } else {
        const auto norm = fit_normalizer(dm_train.x);
        apply_normalizer(norm, dm_train.x);
        apply_normalizer(norm, dm_val.x);
        apply_normalizer(norm, dm_test.x);
        const auto model = train_mlp(dm_train.x, dm_train.y, dm_val.x, dm_val.y, meta, cfg.mlp);
        pred = mlp_predict(model, dm_test.x);
    }

    std::vector<PredictionRecord> records(dm_test.y.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i] = PredictionRecord{dm_test.y[i], pred.labels[i], pred.confidence[i]};
    }
    const auto acc = accuracy_and_confusion(records, meta.classes.size());
    result.accuracy = acc.accuracy;
    result.confusion = acc.confusion;
    result.ece = expected_calibration_error(records, cfg.ece_bins);
    return result;
}

ScenarioOutcome evaluate_cell(const FeatureMatrix& matrix, const RunConfig& cfg, const ScenarioSpec& spec) {
    ScenarioOutcome outcome;
    outcome.sensors = std::string(to_string(matrix.mode));
    outcome.scenario = spec.label();
    outcome.window_s = cfg.window.length_s;
    outcome.filter_enabled = cfg.filter_enabled;
    outcome.repetitions = static_cast<std::size_t>(std::max(1, cfg.repetitions));
    outcome.classes = class_names(cfg.label_scheme);
    outcome.feature_names = matrix.active_feature_names();

    std::vector<double> accuracies;
    std::vector<double> eces;
    for (std::size_t r = 0; r < outcome.repetitions; ++r) {
        const auto rep_seed = derive_seed(cfg.seed, "rep", r);
        auto cell = run_one(matrix, cfg, spec, rep_seed);
        accuracies.push_back(cell.accuracy);
        eces.push_back(cell.ece.ece);
        if (r == 0) {
            outcome.confusion = std::move(cell.confusion);
            outcome.reliability = std::move(cell.ece);
            outcome.importances = std::move(cell.importances);
            const auto split = split_dataset(matrix, cfg.split_ratios, rep_seed, cfg.split_by);
            const auto rows = scenario_select(matrix, split, spec);
            outcome.n_train = rows.train.size();
            outcome.n_test = rows.test.size();
        }
    }
    outcome.accuracy_mean = stats::mean(accuracies);
    outcome.accuracy_std = stats::sample_std(accuracies);
    outcome.ece_mean = stats::mean(eces);
    outcome.ece_std = stats::sample_std(eces);
    return outcome;
}

void write_resolved_config(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    csv::write_file_atomic(out_dir / "resolved_config.ini", cfg.echo());
}

FeatureMatrix load_or_extract(const std::string& features_path, const std::string& manifest_path,
                              const RunConfig& cfg) {
    if (!features_path.empty()) {
        return read_features_csv(features_path, SensorMode::multimodal);
    }
    const auto manifests = load_manifest(manifest_path);
    const auto extraction = extract_all(manifests, cfg);
    auto assembled = assemble_features(extraction.pupil, extraction.hrv, SensorMode::multimodal);
    if (extraction.dropped_windows + assembled.dropped_windows > 0) {
        std::fprintf(stderr, "note: %zu windows dropped during extraction, %zu unmatched in join\n",
                     extraction.dropped_windows, assembled.dropped_windows);
    }
    return std::move(assembled.matrix);
}

SensorMode mode_from_feature_count(std::size_t n) {
    if (n == kPupilFeatureCount) {
        return SensorMode::pupil_only;
    }
    if (n == kHrvFeatureCount) {
        return SensorMode::hrv_only;
    }
    if (n == kFeatureNames.size()) {
        return SensorMode::multimodal;
    }
    throw ContractError("model feature schema does not match any sensor mode");
}

// ---------------------------------------------------------------- commands

int cmd_synth(const RunConfig& cfg, const std::string& out_dir) {
    StudyConfig study = cfg.study;
    study.seed = cfg.seed;
    const auto result = synth_study(study, out_dir);
    write_resolved_config(cfg, out_dir);
    std::fprintf(stderr, "study written: %s (%zu sessions)\n", out_dir.c_str(), result.truth.size() );
    return 0;
}

int cmd_features(const RunConfig& cfg, const std::string& manifest, const std::string& out_file) {
    const auto manifests = load_manifest(manifest);
    const auto extraction = extract_all(manifests, cfg);
    const auto assembled = assemble_features(extraction.pupil, extraction.hrv, SensorMode::multimodal);
    const std::filesystem::path out_path(out_file);
    if (out_path.has_parent_path()) {
        std::filesystem::create_directories(out_path.parent_path());
    }
    write_features_csv(assembled.matrix, out_path);
    csv::write_file_atomic(out_path.string() + ".resolved_config.ini", cfg.echo());
    std::fprintf(stderr, "features written: %s (%zu rows, %zu windows dropped)\n", out_file.c_str(),
                 assembled.matrix.rows.size(), extraction.dropped_windows + assembled.dropped_windows);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& features_file, const std::string& sensor,
              const std::string& out_file) {
    const auto mode = sensor_mode_from_string(sensor);
    const auto matrix = with_mode(read_features_csv(features_file, SensorMode::multimodal), mode);
    const auto split = split_dataset(matrix, cfg.split_ratios, cfg.seed, cfg.split_by);
    const auto imputer = fit_imputer(matrix, split.train);
    auto dm_train = materialize(matrix, split.train, cfg.label_scheme, imputer);
    auto dm_val = materialize(matrix, split.val, cfg.label_scheme, imputer);

    ModelMeta meta;
    meta.feature_names = dm_train.feature_names;
    meta.classes = dm_train.classes;
    meta.seed = cfg.seed;

    Model model;
    if (cfg.classifier == Classifier::rf) {
        model = train_random_forest(dm_train.x, dm_train.y, meta, cfg.rf);
    } else {
        const auto norm = fit_normalizer(dm_train.x);
        apply_normalizer(norm, dm_train.x);
        apply_normalizer(norm, dm_val.x);
        auto mlp = train_mlp(dm_train.x, dm_train.y, dm_val.x, dm_val.y, meta, cfg.mlp);
        bake_input_scaling(mlp, norm.means, norm.stds); // saved model consumes raw features
        model = std::move(mlp);
    }
    const std::filesystem::path out_path(out_file);
    if (out_path.has_parent_path()) {
        std::filesystem::create_directories(out_path.parent_path());
    }
    save_model(model, out_path);
    csv::write_file_atomic(out_path.string() + ".resolved_config.ini", cfg.echo());
    std::fprintf(stderr, "model written: %s\n", out_file.c_str());
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& features_file, const std::string& manifest,
                 const std::string& model_file, const std::string& sensor, const std::string& out_dir,
                 bool svg) {
    const auto base = load_or_extract(features_file, manifest, cfg);
    std::vector<ScenarioOutcome> outcomes;

    if (!model_file.empty()) {
        const auto model = load_model(model_file);
        const auto mode = mode_from_feature_count(model_meta(model).feature_names.size());
        const auto matrix = with_mode(base, mode);
        const auto split = split_dataset(matrix, cfg.split_ratios, cfg.seed, cfg.split_by);
        const auto imputer = fit_imputer(matrix, split.train);
        auto dm_test = materialize(matrix, split.test, cfg.label_scheme, imputer);
        const auto pred = model_predict(model, dm_test.x);

        std::vector<PredictionRecord> records(dm_test.y.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            records[i] = PredictionRecord{dm_test.y[i], pred.labels[i], pred.confidence[i]};
        }
        ScenarioOutcome outcome;
        outcome.sensors = std::string(to_string(mode));
        outcome.scenario = "train-all_test-all";
        outcome.window_s = cfg.window.length_s;
        outcome.filter_enabled = cfg.filter_enabled;
        outcome.repetitions = 1;
        outcome.n_train = split.train.size();
        outcome.n_test = split.test.size();
        outcome.classes = model_meta(model).classes;
        outcome.feature_names = model_meta(model).feature_names;
        const auto acc = accuracy_and_confusion(records, outcome.classes.size());
        outcome.accuracy_mean = acc.accuracy;
        outcome.confusion = acc.confusion;
        outcome.reliability = expected_calibration_error(records, cfg.ece_bins);
        outcome.ece_mean = outcome.reliability.ece;
        if (std::holds_alternative<RandomForestModel>(model)) {
            outcome.importances = rf_feature_importance(std::get<RandomForestModel>(model));
        }
        outcomes.push_back(std::move(outcome));
    } else {
        const auto mode = sensor_mode_from_string(sensor);
        const auto matrix = with_mode(base, mode);
        outcomes.push_back(evaluate_cell(matrix, cfg, ScenarioSpec{}));
    }

    const auto distributions = feature_distribution_summary(base, GroupBy::light);
    emit_report(outcomes, distributions, out_dir, ReportFormats{true, svg});
    write_resolved_config(cfg, out_dir);
    std::fprintf(stderr, "report written: %s\n", out_dir.c_str());
    return 0;
}

int cmd_scenarios(const RunConfig& cfg, const std::string& features_file, const std::string& manifest,
                  const std::string& out_dir, bool svg) {
    const auto base = load_or_extract(features_file, manifest, cfg);
    std::vector<ScenarioOutcome> outcomes;
    for (const auto mode : cfg.sensors) {
        const auto matrix = with_mode(base, mode);
        for (const auto& spec : cfg.scenarios) {
            outcomes.push_back(evaluate_cell(matrix, cfg, spec));
        }
    }
    const auto distributions = feature_distribution_summary(base, GroupBy::light);
    emit_report(outcomes, distributions, out_dir, ReportFormats{true, svg});
    write_resolved_config(cfg, out_dir);
    std::fprintf(stderr, "scenario matrix written: %s (%zu cells)\n", out_dir.c_str(), outcomes.size());
    return 0;
}

int cmd_stats(const RunConfig& cfg, const std::string& features_file, const std::string& features_list,
              const std::string& group_by_str, const std::string& out_dir) {
    const auto matrix = read_features_csv(features_file, SensorMode::multimodal);
    const auto group_by = group_by_from_string(group_by_str);

    std::vector<std::string> wanted;
    {
        std::size_t start = 0;
        for (std::size_t i = 0; i <= features_list.size(); ++i) {
            if (i == features_list.size() || features_list[i] == ',') {
                if (i > start) {
                    wanted.push_back(features_list.substr(start, i - start));
                }
                start = i + 1;
            }
        }
    }

    std::vector<std::string> group_names = group_by == GroupBy::light
                                               ? std::vector<std::string>{"light", "dark"}
                                               : std::vector<std::string>{"rest", "cl1", "cl2"};

    std::string out = "feature,group_by,group_a,group_b,n_a,n_b,t,df,p\n";
    for (const auto& feature : wanted) {
        const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), feature);
        if (it == kFeatureNames.end()) {
            throw ValidationError("unknown feature '" + feature + "'");
        }
        const auto f = static_cast<std::size_t>(it - kFeatureNames.begin());
        std::map<std::string, std::vector<double>> groups;
        for (const auto& row : matrix.rows) {
            const double v = row.features[f];
            if (!std::isfinite(v)) {
                continue;
            }
            const std::string g = group_by == GroupBy::light ? std::string(to_string(row.light))
                                                             : std::string(to_string(row.label));
            groups[g].push_back(v);
        }
        for (std::size_t a = 0; a < group_names.size(); ++a) {
            for (std::size_t b = a + 1; b < group_names.size(); ++b) {
                const auto& ga = groups[group_names[a]];
                const auto& gb = groups[group_names[b]];
                if (ga.size() < 2 || gb.size() < 2) {
                    continue;
                }
                const auto res = welch_t_test(ga, gb);
                out += feature + ',' + std::string(to_string(group_by)) + ',' + group_names[a] + ',' +
                       group_names[b] + ',' + std::to_string(ga.size()) + ',' + std::to_string(gb.size()) +
                       ',' + csv::format_double(res.t) + ',' + csv::format_double(res.df) + ',' +
                       csv::format_double(res.p) + '\n';
            }
        }
    }
    std::filesystem::create_directories(out_dir);
    csv::write_file_atomic(std::filesystem::path(out_dir) / "ttests.csv", out);
    write_resolved_config(cfg, out_dir);
    std::fprintf(stderr, "t-test table written: %s\n", out_dir.c_str());
    return 0;
}

// Re-renders report files from a directory of stored results.
int cmd_report(const RunConfig& cfg, const std::string& from_dir, const std::string& out_dir, bool svg) {
    const std::filesystem::path from(from_dir);
    const auto metrics_path = from / "metrics.csv";
    if (!std::filesystem::exists(metrics_path)) {
        throw IoError("no metrics.csv in " + from_dir);
    }

    std::vector<ScenarioOutcome> outcomes;
    {
        const auto lines = csv::read_lines(metrics_path);
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto f = csv::split_line(lines[i].text);
            if (f.size() != 11) {
                throw ParseError("malformed metrics.csv row at line " + std::to_string(lines[i].number));
            }
            ScenarioOutcome o;
            o.sensors = f[0];
            o.scenario = f[1];
            o.window_s = csv::parse_double(f[2], lines[i].number);
            o.filter_enabled = f[3] == "on";
            o.repetitions = static_cast<std::size_t>(csv::parse_int(f[4], lines[i].number));
            o.n_train = static_cast<std::size_t>(csv::parse_int(f[5], lines[i].number));
            o.n_test = static_cast<std::size_t>(csv::parse_int(f[6], lines[i].number));
            o.accuracy_mean = csv::parse_double(f[7], lines[i].number);
            o.accuracy_std = csv::parse_double(f[8], lines[i].number);
            o.ece_mean = csv::parse_double(f[9], lines[i].number);
            o.ece_std = csv::parse_double(f[10], lines[i].number);
            outcomes.push_back(std::move(o));
        }
    }
    // reliability bins
    if (std::filesystem::exists(from / "reliability_bins.csv")) {
        const auto lines = csv::read_lines(from / "reliability_bins.csv");
        std::map<std::pair<std::string, std::string>, std::vector<ReliabilityBin>> bins;
        std::map<std::pair<std::string, std::string>, std::size_t> max_bin;
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto f = csv::split_line(lines[i].text);
            if (f.size() != 8) {
                continue;
            }
            const auto key = std::make_pair(f[0], f[1]);
            const auto b = static_cast<std::size_t>(csv::parse_int(f[2], lines[i].number));
            auto& vec = bins[key];
            if (vec.size() <= b) {
                vec.resize(b + 1);
            }
            vec[b].count = static_cast<std::size_t>(csv::parse_int(f[5], lines[i].number));
            vec[b].mean_confidence = csv::parse_double(f[6], lines[i].number);
            vec[b].accuracy = csv::parse_double(f[7], lines[i].number);
            max_bin[key] = std::max(max_bin[key], b);
        }
        for (auto& o : outcomes) {
            const auto it = bins.find({o.sensors, o.scenario});
            if (it != bins.end()) {
                o.reliability.bins = it->second;
                o.reliability.ece = o.ece_mean;
            }
        }
    }
    // confusion matrices
    for (auto& o : outcomes) {
        const auto path = from / ("confusion_" + o.sensors + '_' + o.scenario + ".csv");
        if (!std::filesystem::exists(path)) {
            continue;
        }
        const auto lines = csv::read_lines(path);
        if (lines.size() < 2) {
            continue;
        }
        const auto header = csv::split_line(lines[0].text);
        o.classes.assign(header.begin() + 1, header.end());
        o.confusion = ConfusionMatrix(o.classes.size());
        for (std::size_t t = 0; t + 1 < lines.size(); ++t) {
            const auto f = csv::split_line(lines[t + 1].text);
            for (std::size_t p = 0; p < o.classes.size(); ++p) {
                o.confusion.at(t, p) =
                    static_cast<std::size_t>(csv::parse_int(f[p + 1], lines[t + 1].number));
            }
        }
    }
    // importances
    if (std::filesystem::exists(from / "importance.csv")) {
        const auto lines = csv::read_lines(from / "importance.csv");
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto f = csv::split_line(lines[i].text);
            if (f.size() != 4) {
                continue;
            }
            for (auto& o : outcomes) {
                if (o.sensors == f[0] && o.scenario == f[1]) {
                    o.feature_names.push_back(f[2]);
                    o.importances.push_back(csv::parse_double(f[3], lines[i].number));
                }
            }
        }
    }
    // distributions
    std::vector<FeatureDistribution> distributions;
    if (std::filesystem::exists(from / "distributions.csv")) {
        const auto lines = csv::read_lines(from / "distributions.csv");
        for (std::size_t i = 1; i < lines.size(); ++i) {
            const auto f = csv::split_line(lines[i].text);
            if (f.size() != 12 + kHistogramBins) {
                continue;
            }
            if (distributions.empty() || distributions.back().feature != f[0]) {
                FeatureDistribution d;
                d.feature = f[0];
                d.range_lo = csv::parse_double(f[10], lines[i].number);
                d.range_hi = csv::parse_double(f[11], lines[i].number);
                distributions.push_back(std::move(d));
            }
            GroupSummary g;
            g.group = f[1];
            g.count = static_cast<std::size_t>(csv::parse_int(f[2], lines[i].number));
            g.min = csv::parse_double(f[3], lines[i].number);
            g.q1 = csv::parse_double(f[4], lines[i].number);
            g.median = csv::parse_double(f[5], lines[i].number);
            g.q3 = csv::parse_double(f[6], lines[i].number);
            g.max = csv::parse_double(f[7], lines[i].number);
            g.mean = csv::parse_double(f[8], lines[i].number);
            g.stddev = csv::parse_double(f[9], lines[i].number);
            for (std::size_t b = 0; b < kHistogramBins; ++b) {
                g.histogram.push_back(static_cast<std::size_t>(csv::parse_int(f[12 + b], lines[i].number)));
            }
            distributions.back().groups.push_back(std::move(g));
        }
    }

    emit_report(outcomes, distributions, out_dir, ReportFormats{true, svg});
    write_resolved_config(cfg, out_dir);
    std::fprintf(stderr, "report regenerated: %s\n", out_dir.c_str());
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"calm: multimodal cognitive-load estimation from pupillometry and ECG", "calm"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "INI config file");
        const auto push = [&overrides](const std::string& key) {
            return [key, &overrides](const std::string& v) { overrides.emplace_back(key, v); };
        };
        cmd->add_option_function<std::string>("--seed", push("run.seed"), "master seed");
        cmd->add_option_function<std::string>("--window-s", push("window.length_s"), "window length (s)");
        cmd->add_option_function<std::string>("--step-s", push("window.step_s"), "window step (s)");
        cmd->add_flag_callback("--no-filter",
                               [&overrides] { overrides.emplace_back("filter.enabled", "false"); },
                               "disable the pupil low-pass filter");
        cmd->add_option_function<std::string>("--filter-order", push("filter.order"), "low-pass order");
        cmd->add_option_function<std::string>("--cutoff-hz", push("filter.cutoff_hz"), "low-pass cutoff");
        cmd->add_option_function<std::string>("--split-by", push("split.by"), "window | participant");
        cmd->add_option_function<std::string>("--label-scheme", push("labels.scheme"),
                                              "three_class | binary");
        cmd->add_option_function<std::string>("--classifier", push("run.classifier"), "rf | mlp");
        cmd->add_option_function<std::string>("--repetitions", push("eval.repetitions"),
                                              "seeded repetitions");
        cmd->add_option_function<std::string>("--ece-bins", push("eval.ece_bins"), "calibration bins");
        cmd->add_option_function<std::string>("--sensors", push("run.sensors"),
                                              "comma list: pupil,hrv,multimodal");
        cmd->add_option_function<std::string>("--scenarios", push("run.scenarios"),
                                              "comma list of train:test light conditions");
        cmd->add_option_function<std::string>("--participants", push("synth.n_participants"),
                                              "synthetic participants");
        cmd->add_option_function<std::string>("--ecg-device", push("synth.ecg_device"),
                                              "biopac | polar");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic study with ground truth");
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    add_common(synth);

    // features
    auto* features = app.add_subcommand("features", "extract windowed features from a manifest");
    std::string feat_manifest;
    std::string feat_out;
    features->add_option("--manifest", feat_manifest, "manifest CSV")->required();
    features->add_option("--out", feat_out, "output features CSV")->required();
    add_common(features);

    // train
    auto* train = app.add_subcommand("train", "train a classifier on a features CSV");
    std::string train_features;
    std::string train_out;
    std::string train_sensor = "multimodal";
    train->add_option("--features", train_features, "features CSV")->required();
    train->add_option("--out", train_out, "output .calm-model path")->required();
    train->add_option("--sensor", train_sensor, "pupil | hrv | multimodal");
    add_common(train);

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "evaluate one split and emit a report");
    std::string eval_features;
    std::string eval_manifest;
    std::string eval_model;
    std::string eval_sensor = "multimodal";
    std::string eval_out;
    bool eval_svg = false;
    evaluate->add_option("--features", eval_features, "features CSV");
    evaluate->add_option("--manifest", eval_manifest, "manifest CSV (extract features first)");
    evaluate->add_option("--model", eval_model, "stored .calm-model (skip training)");
    evaluate->add_option("--sensor", eval_sensor, "pupil | hrv | multimodal");
    evaluate->add_option("--out", eval_out, "output directory")->required();
    evaluate->add_flag("--svg", eval_svg, "also render SVG figures");
    add_common(evaluate);

    // scenarios
    auto* scenarios = app.add_subcommand("scenarios", "run the full train/test lighting matrix");
    std::string scen_features;
    std::string scen_manifest;
    std::string scen_out;
    bool scen_svg = false;
    scenarios->add_option("--features", scen_features, "features CSV");
    scenarios->add_option("--manifest", scen_manifest, "manifest CSV (extract features first)");
    scenarios->add_option("--out", scen_out, "output directory")->required();
    scenarios->add_flag("--svg", scen_svg, "also render SVG figures");
    add_common(scenarios);

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Welch t-tests over features and groupings");
    std::string stats_features;
    std::string stats_list = "pupil_mean,rmssd";
    std::string stats_group = "light";
    std::string stats_out;
    stats_cmd->add_option("--features", stats_features, "features CSV")->required();
    stats_cmd->add_option("--feature", stats_list, "comma list of features to test");
    stats_cmd->add_option("--group-by", stats_group, "light | task");
    stats_cmd->add_option("--out", stats_out, "output directory")->required();
    add_common(stats_cmd);

    // report
    auto* report = app.add_subcommand("report", "re-render CSV/SVG outputs from stored results");
    std::string report_from;
    std::string report_out;
    bool report_svg = true;
    report->add_option("--from", report_from, "directory with stored results")->required();
    report->add_option("--out", report_out, "output directory")->required();
    report->add_flag("--svg,!--no-svg", report_svg, "render SVG figures (default on)");
    add_common(report);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig cfg;
        apply_environment(cfg);
        if (!config_path.empty()) {
            apply_config_file(cfg, config_path);
        }
        for (const auto& [key, value] : overrides) {
            cfg.apply(key, value);
        }

        if (app.got_subcommand(synth)) {
            return cmd_synth(cfg, synth_out);
        }
        if (app.got_subcommand(features)) {
            return cmd_features(cfg, feat_manifest, feat_out);
        }
        if (app.got_subcommand(train)) {
            return cmd_train(cfg, train_features, train_sensor, train_out);
        }
        if (app.got_subcommand(evaluate)) {
            if (eval_features.empty() == eval_manifest.empty()) {
                std::fprintf(stderr, "evaluate needs exactly one of --features or --manifest\n");
                return 2;
            }
            return cmd_evaluate(cfg, eval_features, eval_manifest, eval_model, eval_sensor, eval_out,
                                eval_svg);
        }
        if (app.got_subcommand(scenarios)) {
            if (scen_features.empty() == scen_manifest.empty()) {
                std::fprintf(stderr, "scenarios needs exactly one of --features or --manifest\n");
                return 2;
            }
            return cmd_scenarios(cfg, scen_features, scen_manifest, scen_out, scen_svg);
        }
        if (app.got_subcommand(stats_cmd)) {
            return cmd_stats(cfg, stats_features, stats_list, stats_group, stats_out);
        }
        if (app.got_subcommand(report)) {
            return cmd_report(cfg, report_from, report_out, report_svg);
        }
        std::fprintf(stderr, "no subcommand selected\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

} // namespace calm::cli
