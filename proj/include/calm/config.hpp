#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "calm/dataset.hpp"
#include "calm/error.hpp"
#include "calm/hrv.hpp"
#include "calm/models.hpp"
#include "calm/pupil.hpp"
#include "calm/signal.hpp"
#include "calm/synth.hpp"

namespace calm {

/// A config file key is unknown or has the wrong type; maps to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Classifier { rf, mlp };

std::string_view to_string(Classifier c);
Classifier classifier_from_string(std::string_view s);

/// Resolved run configuration. Defaults <- CALM_SEED <- config file <- flags,
/// rightmost wins. Unknown keys are rejected.
struct RunConfig {
    WindowSpec window;                 // [window] length_s, step_s
    bool filter_enabled = true;        // [filter] enabled
    int filter_order = 5;              // [filter] order
    double filter_cutoff_hz = 4.0;     // [filter] cutoff_hz

    PupilConfig pupil;                 // [pupil] *
    EcgConfig ecg;                     // [ecg] clip/session
    DetectorConfig detector;           // [ecg] detector settings
    RrArtifactBounds rr_bounds;        // [ecg] rr_min_ms, rr_max_ms
    SpectralConfig spectral;           // [ecg] tachogram/welch settings

    std::array<double, 3> split_ratios = {0.7, 0.1, 0.2}; // [split] train,val,test
    SplitBy split_by = SplitBy::window;                   // [split] by
    LabelScheme label_scheme = LabelScheme::three_class;  // [labels] scheme

    Classifier classifier = Classifier::rf; // [run] classifier
    RfConfig rf;                            // [rf] *
    MlpConfig mlp;                          // [mlp] *

    int ece_bins = 10;    // [eval] ece_bins
    int repetitions = 1;  // [eval] repetitions

    std::uint64_t seed = 42; // [run] seed
    std::vector<SensorMode> sensors = {SensorMode::pupil_only, SensorMode::hrv_only,
                                       SensorMode::multimodal}; // [run] sensors
    std::vector<ScenarioSpec> scenarios = default_scenarios();  // [run] scenarios

    StudyConfig study; // [synth] *

    /// Applies one dotted key (e.g. "window.length_s"). Throws ConfigError
    /// for unknown keys or unparsable values.
    void apply(const std::string& key, const std::string& value);

    /// Deterministic INI echo of every setting, written beside run outputs.
    std::string echo() const;
};

/// Parses an INI-style file ([section] headers, key = value, # comments)
/// into dotted keys and applies them in file order.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Lowest-precedence seed source.
void apply_environment(RunConfig& config);

} // namespace calm
