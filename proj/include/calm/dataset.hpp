#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "calm/hrv.hpp"
#include "calm/ingest.hpp"
#include "calm/matrix.hpp"
#include "calm/pupil.hpp"

namespace calm {

/// Canonical feature order. Fixed and versioned: every matrix, CSV and model
/// uses these names in this order.
inline constexpr std::array<std::string_view, 13> kFeatureNames = {
    "pupil_mean", "pupil_std", "ipa", "pd_auc", "pd_roc",
    "rmssd", "sdnn", "pnn50", "mean_rr", "median_rr", "resp_rate", "hf_power", "lf_hf",
};
inline constexpr std::size_t kPupilFeatureCount = 5;
inline constexpr std::size_t kHrvFeatureCount = 8;

enum class SensorMode { pupil_only, hrv_only, multimodal };

std::string_view to_string(SensorMode m);
SensorMode sensor_mode_from_string(std::string_view s);

/// One labeled window. Features are in canonical order; NaN marks a value
/// that is missing or not covered by the sensor mode.
struct FeatureRow {
    std::string participant_id;
    std::string session_id;
    Device device = Device::tobii;
    double window_start_s = 0.0;
    Task label = Task::rest;
    Light light = Light::light;
    std::array<double, 13> features{};
};

struct FeatureMatrix {
    SensorMode mode = SensorMode::multimodal;
    std::vector<FeatureRow> rows;

    /// Indices into kFeatureNames active under the sensor mode.
    std::vector<std::size_t> active_features() const;
    std::vector<std::string> active_feature_names() const;
};

/// Per-window pupil features with session identity, ready for assembly.
struct PupilWindowRecord {
    std::string participant_id;
    std::string session_id;
    Task task = Task::rest;
    Light light = Light::light;
    int window_ordinal = 0;
    double window_start_s = 0.0;
    PupilBasicFeatures basic;
    double ipa = 0.0;
};

/// Per-window HRV features with session identity, ready for assembly.
struct HrvWindowRecord {
    std::string participant_id;
    std::string session_id;
    Device device = Device::biopac;
    Task task = Task::rest;
    Light light = Light::light;
    int window_ordinal = 0;
    double window_start_s = 0.0;
    HrvTimeFeatures time;
    std::optional<HrvFreqFeatures> freq; // absent when the window span is too short
    std::optional<double> resp_rate_bpm;
};

struct AssembleResult {
    FeatureMatrix matrix;
    std::size_t dropped_windows = 0; // windows without a partner in the join
};

/// Joins pupil and HRV windows on (session_id, window ordinal). Saturated
/// ratios and absent respiration estimates become missing markers for the
/// imputation stage.
AssembleResult assemble_features(std::span<const PupilWindowRecord> pupil,
                                 std::span<const HrvWindowRecord> hrv, SensorMode mode);

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

enum class SplitBy { window, participant };

/// Stratified shuffled split with largest-remainder rounding: per-class
/// proportions land within one row of the requested ratios. Classes with
/// fewer than 3 rows trigger a warning and an unstratified fallback.
DatasetSplit split_dataset(const FeatureMatrix& matrix, std::array<double, 3> ratios,
                           std::uint64_t seed, SplitBy by = SplitBy::window);

struct ScenarioSpec {
    enum class TrainLight { light, all };
    enum class TestLight { light, dark, all };
    TrainLight train_light = TrainLight::all;
    TestLight test_light = TestLight::all;

    std::string label() const;
};

/// The five train/test lighting scenarios evaluated per sensor block.
std::vector<ScenarioSpec> default_scenarios();

ScenarioSpec scenario_from_strings(std::string_view train, std::string_view test);

struct ScenarioRows {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// Filters each side of the split by the scenario's lighting condition.
/// Never moves a row between sides. Throws ScenarioError if a side empties.
ScenarioRows scenario_select(const FeatureMatrix& matrix, const DatasetSplit& split,
                             const ScenarioSpec& spec);

enum class LabelScheme { three_class, binary };

std::string_view to_string(LabelScheme s);
LabelScheme label_scheme_from_string(std::string_view s);

/// Class names under a labeling scheme ({rest, cl1, cl2} or {rest, load}).
std::vector<std::string> class_names(LabelScheme scheme);
int encode_label(Task task, LabelScheme scheme);

/// Per-feature training-set means for missing-value imputation. Features
/// missing from every training row impute to zero.
struct Imputer {
    std::vector<double> means; // one per active feature
};

Imputer fit_imputer(const FeatureMatrix& matrix, std::span<const std::size_t> rows);

/// Per-feature z-score parameters (training statistics), for the MLP path.
struct Normalizer {
    std::vector<double> means;
    std::vector<double> stds;
};

Normalizer fit_normalizer(const Matrix& x);
void apply_normalizer(const Normalizer& norm, Matrix& x);

struct DesignMatrix {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> feature_names;
    std::vector<std::string> classes;
};

/// Materializes selected rows into a dense matrix with imputation applied.
DesignMatrix materialize(const FeatureMatrix& matrix, std::span<const std::size_t> rows,
                         LabelScheme scheme, const Imputer& imputer);

/// Features CSV round-trips bit-exactly (canonical column order, shortest
/// round-trip decimals, missing values as empty cells).
void write_features_csv(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_features_csv(const std::filesystem::path& path, SensorMode mode);

} // namespace calm
