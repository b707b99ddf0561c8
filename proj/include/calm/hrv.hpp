#pragma once

#include <optional>
#include <span>
#include <vector>

#include "calm/ingest.hpp"
#include "calm/signal.hpp"

namespace calm {

/// Preprocessed ECG at the device rate, trimmed to the session length.
struct EcgSignal {
    SampledSignal signal; // mV
    Device device = Device::biopac;
    GapReport gaps;
};

/// Inter-beat intervals with the beat times that produced them.
/// intervals_ms[i] spans beat_times_s pairs after artifact rejection, so
/// |intervals| <= |beats| - 1.
struct RRSeries {
    std::vector<double> beat_times_s;   // time of the second beat of each interval
    std::vector<double> intervals_ms;
    std::size_t rejected_count = 0;
};

struct HrvTimeFeatures {
    double rmssd_ms = 0.0;
    double sdnn_ms = 0.0;
    double pnn50_pct = 0.0;
    double mean_rr_ms = 0.0;
    double median_rr_ms = 0.0;
};

struct HrvFreqFeatures {
    double hf_power_ms2 = 0.0;
    double lf_hf = 0.0;
    bool saturated = false; // HF power vanished; ratio is a sentinel
};

struct EcgConfig {
    double clip_lo_mv = 300.0;
    double clip_hi_mv = 1000.0;
    double session_s = 180.0;
    double min_recording_s = 60.0;
    double max_gap_s = 1.0;
};

struct DetectorConfig {
    double band_lo_hz = 5.0;
    double band_hi_hz = 15.0;
    int band_order = 2;
    double integration_ms = 150.0;
    double refractory_ms = 200.0;
    double refine_ms = 50.0;
    double searchback_factor = 1.66;
};

struct RrArtifactBounds {
    double min_ms = 300.0;
    double max_ms = 2000.0;
};

struct SpectralConfig {
    double tachogram_rate_hz = 4.0;
    double welch_segment_s = 60.0;
    double lf_lo_hz = 0.04;
    double lf_hi_hz = 0.15;
    double hf_lo_hz = 0.15;
    double hf_hi_hz = 0.40;
    double resp_lo_hz = 0.10;
    double resp_hi_hz = 0.50;
    double resp_peak_floor_ratio = 4.0; // PSD peak vs in-band median
    double hf_power_epsilon_ms2 = 1e-12;
    double lf_hf_sentinel = 1e9;
};

/// Outlier clipping (clinical device only), resampling to the device rate
/// and normalization to the fixed session length.
EcgSignal preprocess_ecg(const RawChannel& raw, Device device, double nominal_rate_hz,
                         const EcgConfig& config = {});

/// Pan-Tompkins style QRS detection: band-pass, derivative, squaring,
/// moving-window integration, adaptive dual threshold with refractory
/// period and search-back. Beat times are refined to the local raw-signal
/// maximum. Returns ascending beat times in seconds.
std::vector<double> detect_r_peaks(const EcgSignal& ecg, const DetectorConfig& config = {});

/// Successive differences in ms; intervals outside the artifact bounds are
/// rejected and counted.
RRSeries rr_from_peaks(std::span<const double> beat_times_s, const RrArtifactBounds& bounds = {});

/// Restriction of an RR series to intervals whose closing beat falls in
/// [start_s, start_s + length_s). Used by the windowed feature pipeline.
RRSeries slice_rr(const RRSeries& rr, double start_s, double length_s);

HrvTimeFeatures hrv_time_features(const RRSeries& rr);

HrvFreqFeatures hrv_freq_features(const RRSeries& rr, const SpectralConfig& config = {});

/// ECG-derived respiration from R-peak amplitude modulation, in breaths per
/// minute. Returns nullopt when no spectral peak clears the noise floor.
std::optional<double> respiration_rate(const EcgSignal& ecg, std::span<const double> beat_times_s,
                                       const SpectralConfig& config = {});

} // namespace calm
