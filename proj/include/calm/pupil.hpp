#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "calm/ingest.hpp"
#include "calm/signal.hpp"

namespace calm {

/// Wavelets available to the pupillary-activity index. Both are orthogonal
/// with enough vanishing moments to annihilate linear trends.
enum class Wavelet { sym16, db2 };

enum class SigmaEstimator { mad, stddev };

struct IpaConfig {
    Wavelet wavelet = Wavelet::sym16;
    int level = 2;
    double threshold_scale = 1.0;
    SigmaEstimator sigma = SigmaEstimator::mad;
};

struct PupilConfig {
    double clip_lo_mm = 1.5;
    double clip_hi_mm = 9.0;
    double rate_hz = 100.0;
    double max_gap_s = 1.0;
    bool filter_enabled = true;
    int filter_order = 5;
    double filter_cutoff_hz = 4.0;
    IpaConfig ipa;
};

/// Cleaned pupil-diameter trace at the working rate, with flagged long gaps.
struct PupilTrace {
    SampledSignal signal;
    GapReport gaps;
};

struct PupilBasicFeatures {
    double mean_mm = 0.0;
    double std_mm = 0.0;
    double auc_mm_s = 0.0;   // trapezoidal integral of diameter over the window
    double roc_mm_per_s = 0.0; // least-squares slope of diameter vs time
};

/// clip to physiological range -> resample to the working rate ->
/// zero-phase low-pass. Gap report propagated from resampling.
PupilTrace preprocess_pupil(const RawChannel& raw, const PupilConfig& config = {});

/// Mean, sample standard deviation, area under the curve and rate of change
/// of one window.
PupilBasicFeatures extract_pupil_basic(SignalView window);

/// Index of pupillary activity: rate of wavelet-detail modulus maxima that
/// survive the universal threshold, in events per second.
double compute_ipa(SignalView window, const IpaConfig& config = {});

/// Scaling filter taps for the configured wavelet (exposed for tests).
std::span<const double> wavelet_scaling_taps(Wavelet w);

std::string_view to_string(Wavelet w);
Wavelet wavelet_from_string(std::string_view s);

} // namespace calm
