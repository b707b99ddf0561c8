#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "calm/dataset.hpp"

namespace calm {

/// One scored test row: true label, predicted label, confidence of the
/// prediction (vote fraction or max softmax probability).
struct PredictionRecord {
    int y = 0;
    int y_hat = 0;
    double p_hat = 1.0;
};

struct ConfusionMatrix {
    std::size_t n_classes = 0;
    std::vector<std::size_t> counts; // row = true class, column = predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t n) : n_classes(n), counts(n * n, 0) {}
    std::size_t at(std::size_t t, std::size_t p) const { return counts[t * n_classes + p]; }
    std::size_t& at(std::size_t t, std::size_t p) { return counts[t * n_classes + p]; }
    std::size_t total() const;
    std::size_t trace() const;
};

struct AccuracyResult {
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

AccuracyResult accuracy_and_confusion(std::span<const PredictionRecord> records, std::size_t n_classes);

struct ReliabilityBin {
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double accuracy = 0.0;
};

struct EceResult {
    double ece = 0.0;
    std::vector<ReliabilityBin> bins; // one per bin, empty bins have count 0
};

/// Expected calibration error over equispaced confidence bins
/// (0, 1/M], (1/M, 2/M], ..., ((M-1)/M, 1].
EceResult expected_calibration_error(std::span<const PredictionRecord> records, int n_bins = 10);

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    bool degenerate = false; // both samples had zero variance
};

/// Welch's unequal-variance t-test with a two-sided p-value computed through
/// the regularized incomplete beta function.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b) (exposed for the statistics tests).
double regularized_incomplete_beta(double a, double b, double x);

struct GroupSummary {
    std::string group;
    std::size_t count = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    double mean = 0.0, stddev = 0.0;
    std::vector<std::size_t> histogram; // kHistogramBins over the pooled range
};

struct FeatureDistribution {
    std::string feature;
    double range_lo = 0.0;
    double range_hi = 0.0;
    std::vector<GroupSummary> groups;
};

inline constexpr std::size_t kHistogramBins = 50;

enum class GroupBy { light, task };

std::string_view to_string(GroupBy g);
GroupBy group_by_from_string(std::string_view s);

/// Per-feature per-group quartiles, moments and a histogram over the pooled
/// feature range. Missing values are excluded; empty groups are omitted.
std::vector<FeatureDistribution> feature_distribution_summary(const FeatureMatrix& matrix, GroupBy group_by);

/// One evaluated (sensors, scenario) cell, aggregated over N seeded
/// repetitions. Confusion/reliability/importances come from the first
/// repetition; mean and std are over all repetitions.
struct ScenarioOutcome {
    std::string sensors;
    std::string scenario;
    double window_s = 60.0;
    bool filter_enabled = true;
    std::size_t repetitions = 1;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;
    double ece_mean = 0.0;
    double ece_std = 0.0;
    ConfusionMatrix confusion;
    EceResult reliability;
    std::vector<double> importances;
    std::vector<std::string> feature_names;
    std::vector<std::string> classes;
};

struct ReportFormats {
    bool csv = true;
    bool svg = false;
};

/// Writes metrics.csv, confusion_<scenario>.csv, reliability_bins.csv,
/// importance.csv and distributions.csv (plus SVG renderings on request)
/// into out_dir.
void emit_report(std::span<const ScenarioOutcome> outcomes,
                 std::span<const FeatureDistribution> distributions,
                 const std::filesystem::path& out_dir, const ReportFormats& formats = {});

} // namespace calm
