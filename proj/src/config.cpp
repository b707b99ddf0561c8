#include "calm/config.hpp"

#include <charconv>
#include <cstdlib>

#include "calm/csv.hpp"

namespace calm {

namespace {

double to_double(const std::string& key, const std::string& value) {
    double v = 0.0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

long long to_int(const std::string& key, const std::string& value) {
    long long v = 0;
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "1") {
        return true;
    }
    if (value == "false" || value == "off" || value == "0") {
        return false;
    }
    throw ConfigError("config key '" + key + "' expects true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= value.size(); ++i) {
        if (i == value.size() || value[i] == ',') {
            if (i > start) {
                out.push_back(value.substr(start, i - start));
            }
            start = i + 1;
        }
    }
    return out;
}

} // namespace

std::string_view to_string(Classifier c) {
    return c == Classifier::rf ? "rf" : "mlp";
}

Classifier classifier_from_string(std::string_view s) {
    if (s == "rf") return Classifier::rf;
    if (s == "mlp") return Classifier::mlp;
    throw ConfigError("classifier must be rf or mlp, got '" + std::string(s) + "'");
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "window.length_s") {
        window.length_s = to_double(key, value);
    } else if (key == "window.step_s") {
        window.step_s = to_double(key, value);
    } else if (key == "filter.enabled") {
        filter_enabled = to_bool(key, value);
    } else if (key == "filter.order") {
        filter_order = static_cast<int>(to_int(key, value));
    } else if (key == "filter.cutoff_hz") {
        filter_cutoff_hz = to_double(key, value);
    } else if (key == "pupil.clip_lo_mm") {
        pupil.clip_lo_mm = to_double(key, value);
    } else if (key == "pupil.clip_hi_mm") {
        pupil.clip_hi_mm = to_double(key, value);
    } else if (key == "pupil.rate_hz") {
        pupil.rate_hz = to_double(key, value);
    } else if (key == "pupil.max_gap_s") {
        pupil.max_gap_s = to_double(key, value);
    } else if (key == "pupil.ipa_wavelet") {
        try {
            pupil.ipa.wavelet = wavelet_from_string(value);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "pupil.ipa_level") {
        pupil.ipa.level = static_cast<int>(to_int(key, value));
    } else if (key == "pupil.ipa_threshold_scale") {
        pupil.ipa.threshold_scale = to_double(key, value);
    } else if (key == "pupil.ipa_sigma") {
        if (value == "mad") {
            pupil.ipa.sigma = SigmaEstimator::mad;
        } else if (value == "std") {
            pupil.ipa.sigma = SigmaEstimator::stddev;
        } else {
            throw ConfigError("config key '" + key + "' expects mad or std, got '" + value + "'");
        }
    } else if (key == "ecg.clip_lo_mv") {
        ecg.clip_lo_mv = to_double(key, value);
    } else if (key == "ecg.clip_hi_mv") {
        ecg.clip_hi_mv = to_double(key, value);
    } else if (key == "ecg.session_s") {
        ecg.session_s = to_double(key, value);
        study.session_s = ecg.session_s;
    } else if (key == "ecg.max_gap_s") {
        ecg.max_gap_s = to_double(key, value);
    } else if (key == "ecg.band_lo_hz") {
        detector.band_lo_hz = to_double(key, value);
    } else if (key == "ecg.band_hi_hz") {
        detector.band_hi_hz = to_double(key, value);
    } else if (key == "ecg.integration_ms") {
        detector.integration_ms = to_double(key, value);
    } else if (key == "ecg.refractory_ms") {
        detector.refractory_ms = to_double(key, value);
    } else if (key == "ecg.refine_ms") {
        detector.refine_ms = to_double(key, value);
    } else if (key == "ecg.rr_min_ms") {
        rr_bounds.min_ms = to_double(key, value);
    } else if (key == "ecg.rr_max_ms") {
        rr_bounds.max_ms = to_double(key, value);
    } else if (key == "ecg.tachogram_hz") {
        spectral.tachogram_rate_hz = to_double(key, value);
    } else if (key == "ecg.welch_segment_s") {
        spectral.welch_segment_s = to_double(key, value);
    } else if (key == "split.train") {
        split_ratios[0] = to_double(key, value);
    } else if (key == "split.val") {
        split_ratios[1] = to_double(key, value);
    } else if (key == "split.test") {
        split_ratios[2] = to_double(key, value);
    } else if (key == "split.by") {
        if (value == "window") {
            split_by = SplitBy::window;
        } else if (value == "participant") {
            split_by = SplitBy::participant;
        } else {
            throw ConfigError("config key '" + key + "' expects window or participant, got '" + value + "'");
        }
    } else if (key == "labels.scheme") {
        try {
            label_scheme = label_scheme_from_string(value);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "run.classifier") {
        classifier = classifier_from_string(value);
    } else if (key == "run.seed") {
        seed = static_cast<std::uint64_t>(to_int(key, value));
        study.seed = seed;
    } else if (key == "run.sensors") {
        sensors.clear();
        try {
            for (const auto& item : split_list(value)) {
                sensors.push_back(sensor_mode_from_string(item));
            }
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
        if (sensors.empty()) {
            throw ConfigError("config key 'run.sensors' expects a non-empty list");
        }
    } else if (key == "run.scenarios") {
        scenarios.clear();
        for (const auto& item : split_list(value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ConfigError("config key 'run.scenarios' expects train:test pairs, got '" + item + "'");
            }
            try {
                scenarios.push_back(scenario_from_strings(item.substr(0, colon), item.substr(colon + 1)));
            } catch (const ValidationError& e) {
                throw ConfigError(e.what());
            }
        }
        if (scenarios.empty()) {
            throw ConfigError("config key 'run.scenarios' expects a non-empty list");
        }
    } else if (key == "rf.n_trees") {
        rf.n_trees = static_cast<int>(to_int(key, value));
    } else if (key == "rf.max_depth") {
        rf.max_depth = static_cast<int>(to_int(key, value));
    } else if (key == "rf.min_samples_leaf") {
        rf.min_samples_leaf = static_cast<int>(to_int(key, value));
    } else if (key == "rf.features_per_split") {
        rf.features_per_split = static_cast<int>(to_int(key, value));
    } else if (key == "mlp.learning_rate") {
        mlp.learning_rate = to_double(key, value);
    } else if (key == "mlp.batch_size") {
        mlp.batch_size = static_cast<int>(to_int(key, value));
    } else if (key == "mlp.max_epochs") {
        mlp.max_epochs = static_cast<int>(to_int(key, value));
    } else if (key == "mlp.patience") {
        mlp.patience = static_cast<int>(to_int(key, value));
    } else if (key == "eval.ece_bins") {
        ece_bins = static_cast<int>(to_int(key, value));
    } else if (key == "eval.repetitions") {
        repetitions = static_cast<int>(to_int(key, value));
    } else if (key == "synth.n_participants") {
        study.n_participants = static_cast<int>(to_int(key, value));
    } else if (key == "synth.session_s") {
        study.session_s = to_double(key, value);
    } else if (key == "synth.pupil_base_light_mm") {
        study.pupil_base_light_mm = to_double(key, value);
    } else if (key == "synth.pupil_base_dark_mm") {
        study.pupil_base_dark_mm = to_double(key, value);
    } else if (key == "synth.pupil_noise_sd_mm") {
        study.pupil_noise_sd_mm = to_double(key, value);
    } else if (key == "synth.blink_rate_hz") {
        study.blink_rate_hz = to_double(key, value);
    } else if (key == "synth.ecg_snr_db") {
        study.ecg_snr_db = to_double(key, value);
    } else if (key == "synth.ecg_device") {
        if (value == "biopac") {
            study.ecg_device = Device::biopac;
        } else if (value == "polar") {
            study.ecg_device = Device::polar;
        } else {
            throw ConfigError("config key '" + key + "' expects biopac or polar, got '" + value + "'");
        }
    } else if (key == "synth.rr_base_rest_ms") {
        study.tasks[0].rr_base_ms = to_double(key, value);
    } else if (key == "synth.rr_base_cl1_ms") {
        study.tasks[1].rr_base_ms = to_double(key, value);
    } else if (key == "synth.rr_base_cl2_ms") {
        study.tasks[2].rr_base_ms = to_double(key, value);
    } else if (key == "synth.rr_depth_rest_ms") {
        study.tasks[0].rr_mod_depth_ms = to_double(key, value);
    } else if (key == "synth.rr_depth_cl1_ms") {
        study.tasks[1].rr_mod_depth_ms = to_double(key, value);
    } else if (key == "synth.rr_depth_cl2_ms") {
        study.tasks[2].rr_mod_depth_ms = to_double(key, value);
    } else if (key == "synth.pupil_delta_cl1_mm") {
        study.tasks[1].pupil_delta_mm = to_double(key, value);
    } else if (key == "synth.pupil_delta_cl2_mm") {
        study.tasks[2].pupil_delta_mm = to_double(key, value);
    } else if (key == "synth.participant_pupil_sd_mm") {
        study.participant_pupil_sd_mm = to_double(key, value);
    } else if (key == "synth.participant_rr_sd_ms") {
        study.participant_rr_sd_ms = to_double(key, value);
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

std::string RunConfig::echo() const {
    const auto fmt = [](double v) { return csv::format_double(v); };
    std::string out;
    out += "[window]\n";
    out += "length_s = " + fmt(window.length_s) + "\n";
    out += "step_s = " + fmt(window.step_s) + "\n";
    out += "\n[filter]\n";
    out += std::string("enabled = ") + (filter_enabled ? "true" : "false") + "\n";
    out += "order = " + std::to_string(filter_order) + "\n";
    out += "cutoff_hz = " + fmt(filter_cutoff_hz) + "\n";
    out += "\n[pupil]\n";
    out += "clip_lo_mm = " + fmt(pupil.clip_lo_mm) + "\n";
    out += "clip_hi_mm = " + fmt(pupil.clip_hi_mm) + "\n";
    out += "rate_hz = " + fmt(pupil.rate_hz) + "\n";
    out += "max_gap_s = " + fmt(pupil.max_gap_s) + "\n";
    out += "ipa_wavelet = " + std::string(to_string(pupil.ipa.wavelet)) + "\n";
    out += "ipa_level = " + std::to_string(pupil.ipa.level) + "\n";
    out += "ipa_threshold_scale = " + fmt(pupil.ipa.threshold_scale) + "\n";
    out += std::string("ipa_sigma = ") + (pupil.ipa.sigma == SigmaEstimator::mad ? "mad" : "std") + "\n";
    out += "\n[ecg]\n";
    out += "clip_lo_mv = " + fmt(ecg.clip_lo_mv) + "\n";
    out += "clip_hi_mv = " + fmt(ecg.clip_hi_mv) + "\n";
    out += "session_s = " + fmt(ecg.session_s) + "\n";
    out += "max_gap_s = " + fmt(ecg.max_gap_s) + "\n";
    out += "band_lo_hz = " + fmt(detector.band_lo_hz) + "\n";
    out += "band_hi_hz = " + fmt(detector.band_hi_hz) + "\n";
    out += "integration_ms = " + fmt(detector.integration_ms) + "\n";
    out += "refractory_ms = " + fmt(detector.refractory_ms) + "\n";
    out += "refine_ms = " + fmt(detector.refine_ms) + "\n";
    out += "rr_min_ms = " + fmt(rr_bounds.min_ms) + "\n";
    out += "rr_max_ms = " + fmt(rr_bounds.max_ms) + "\n";
    out += "tachogram_hz = " + fmt(spectral.tachogram_rate_hz) + "\n";
    out += "welch_segment_s = " + fmt(spectral.welch_segment_s) + "\n";
    out += "\n[split]\n";
    out += "train = " + fmt(split_ratios[0]) + "\n";
    out += "val = " + fmt(split_ratios[1]) + "\n";
    out += "test = " + fmt(split_ratios[2]) + "\n";
    out += std::string("by = ") + (split_by == SplitBy::window ? "window" : "participant") + "\n";
    out += "\n[labels]\n";
    out += "scheme = " + std::string(to_string(label_scheme)) + "\n";
    out += "\n[run]\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "classifier = " + std::string(to_string(classifier)) + "\n";
    out += "sensors = ";
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        if (i) {
            out += ',';
        }
        out += to_string(sensors[i]);
    }
    out += "\nscenarios = ";
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        if (i) {
            out += ',';
        }
        out += scenarios[i].train_light == ScenarioSpec::TrainLight::light ? "light" : "all";
        out += ':';
        out += scenarios[i].test_light == ScenarioSpec::TestLight::light
                   ? "light"
                   : scenarios[i].test_light == ScenarioSpec::TestLight::dark ? "dark" : "all";
    }
    out += "\n";
    out += "\n[rf]\n";
    out += "n_trees = " + std::to_string(rf.n_trees) + "\n";
    out += "max_depth = " + std::to_string(rf.max_depth) + "\n";
    out += "min_samples_leaf = " + std::to_string(rf.min_samples_leaf) + "\n";
    out += "features_per_split = " + std::to_string(rf.features_per_split) + "\n";
    out += "\n[mlp]\n";
    out += "learning_rate = " + fmt(mlp.learning_rate) + "\n";
    out += "batch_size = " + std::to_string(mlp.batch_size) + "\n";
    out += "max_epochs = " + std::to_string(mlp.max_epochs) + "\n";
    out += "patience = " + std::to_string(mlp.patience) + "\n";
    out += "\n[eval]\n";
    out += "ece_bins = " + std::to_string(ece_bins) + "\n";
    out += "repetitions = " + std::to_string(repetitions) + "\n";
    out += "\n[synth]\n";
    out += "n_participants = " + std::to_string(study.n_participants) + "\n";
    out += "session_s = " + fmt(study.session_s) + "\n";
    out += "pupil_base_light_mm = " + fmt(study.pupil_base_light_mm) + "\n";
    out += "pupil_base_dark_mm = " + fmt(study.pupil_base_dark_mm) + "\n";
    out += "pupil_noise_sd_mm = " + fmt(study.pupil_noise_sd_mm) + "\n";
    out += "blink_rate_hz = " + fmt(study.blink_rate_hz) + "\n";
    out += "ecg_snr_db = " + fmt(study.ecg_snr_db) + "\n";
    out += "ecg_device = " + std::string(to_string(study.ecg_device)) + "\n";
    out += "rr_base_rest_ms = " + fmt(study.tasks[0].rr_base_ms) + "\n";
    out += "rr_base_cl1_ms = " + fmt(study.tasks[1].rr_base_ms) + "\n";
    out += "rr_base_cl2_ms = " + fmt(study.tasks[2].rr_base_ms) + "\n";
    out += "rr_depth_rest_ms = " + fmt(study.tasks[0].rr_mod_depth_ms) + "\n";
    out += "rr_depth_cl1_ms = " + fmt(study.tasks[1].rr_mod_depth_ms) + "\n";
    out += "rr_depth_cl2_ms = " + fmt(study.tasks[2].rr_mod_depth_ms) + "\n";
    out += "pupil_delta_cl1_mm = " + fmt(study.tasks[1].pupil_delta_mm) + "\n";
    out += "pupil_delta_cl2_mm = " + fmt(study.tasks[2].pupil_delta_mm) + "\n";
    out += "participant_pupil_sd_mm = " + fmt(study.participant_pupil_sd_mm) + "\n";
    out += "participant_rr_sd_ms = " + fmt(study.participant_rr_sd_ms) + "\n";
    return out;
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    std::string section;
    for (const auto& ln : lines) {
        const auto text = csv::trim(ln.text);
        if (text.front() == ';') {
            continue;
        }
        if (text.front() == '[') {
            if (text.back() != ']') {
                throw ConfigError("line " + std::to_string(ln.number) + ": malformed section header '" +
                                  std::string(text) + "'");
            }
            section = std::string(csv::trim(text.substr(1, text.size() - 2)));
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(ln.number) + ": expected key = value, got '" +
                              std::string(text) + "'");
        }
        const auto raw_key = std::string(csv::trim(text.substr(0, eq)));
        const auto value = std::string(csv::trim(text.substr(eq + 1)));
        // keys may be dotted at top level or plain within a section
        const std::string key = (raw_key.find('.') != std::string::npos || section.empty())
                                    ? raw_key
                                    : section + '.' + raw_key;
        config.apply(key, value);
    }
}

void apply_environment(RunConfig& config) {
    if (const char* env = std::getenv("CALM_SEED")) {
        config.apply("run.seed", env);
    }
}

} // namespace calm
