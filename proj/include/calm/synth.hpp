#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "calm/hrv.hpp"
#include "calm/ingest.hpp"
#include "calm/rng.hpp"
#include "calm/signal.hpp"

namespace calm {

struct EcgSynthConfig {
    double rate_hz = 1000.0;
    double qrs_width_s = 0.08; // full template width (4 sigma)
    double qrs_amplitude_mv = 1.0;
    double baseline_mv = 500.0;
    double snr_db = std::numeric_limits<double>::infinity(); // vs the clean AC power
    double amp_mod_freq_hz = 0.0; // 0 disables R-amplitude modulation
    double amp_mod_depth = 0.0;   // relative, e.g. 0.3
    double duration_s = 0.0;      // 0 = derive from the RR plan
    Device device = Device::biopac;
};

struct EcgSynthResult {
    EcgSignal ecg;
    std::vector<double> true_beat_times_s;
};

/// Gaussian-QRS impulse train on a flat baseline with optional sinusoidal
/// R-amplitude modulation and additive white noise at the requested SNR.
EcgSynthResult synth_ecg(std::span<const double> rr_plan_ms, const EcgSynthConfig& config, Rng& rng);

struct PupilSynthConfig {
    double duration_s = 180.0;
    double rate_hz = 100.0;
    double base_mm = 3.0;
    double cl_delta_mm = 0.0;
    double hf_activity_mm = 0.0;   // amplitude scale of oscillatory bursts
    double burst_rate_hz = 0.2;    // Poisson rate of bursts
    double blink_rate_hz = 0.2;    // Poisson rate of carved gaps
    double noise_sd_mm = 0.05;     // band-limited background noise
    double noise_bandwidth_hz = 2.0;
};

struct PupilTruth {
    double injected_mean_mm = 0.0;
    double base_mm = 0.0;
    double cl_delta_mm = 0.0;
    double hf_activity_mm = 0.0;
    std::size_t blink_count = 0;
    std::vector<GapInterval> blink_intervals;
};

struct PupilSynthResult {
    IrregularSeries series; // grid samples with blink gaps carved out
    PupilTruth truth;
};

PupilSynthResult synth_pupil(const PupilSynthConfig& config, Rng& rng);

/// Per-task physiological effect sizes for the study generator.
struct TaskEffects {
    double rr_base_ms = 800.0;
    double rr_mod_freq_hz = 0.25;
    double rr_mod_depth_ms = 40.0;
    double rr_jitter_ms = 10.0;
    double pupil_delta_mm = 0.0;
    double hf_activity_mm = 0.0;
};

struct StudyConfig {
    int n_participants = 10;
    double session_s = 180.0;
    // rest / cl1 / cl2: heart rate rises and vagal modulation shrinks with
    // load; the pupil dilates slightly and shows more high-frequency activity
    std::array<TaskEffects, 3> tasks = {
        TaskEffects{850.0, 0.25, 60.0, 10.0, 0.0, 0.00},
        TaskEffects{800.0, 0.25, 40.0, 10.0, 0.25, 0.03},
        TaskEffects{750.0, 0.25, 25.0, 10.0, 0.50, 0.06},
    };
    double pupil_base_light_mm = 3.0;
    double pupil_base_dark_mm = 5.5; // dilation in darkness
    double pupil_noise_sd_mm = 0.05;
    double blink_rate_hz = 0.2;
    double ecg_snr_db = 20.0;
    double r_amp_mod_freq_hz = 0.25; // respiration imprint on R amplitude
    double r_amp_mod_depth = 0.2;
    Device ecg_device = Device::polar;
    double participant_pupil_sd_mm = 0.15; // per-participant base offsets
    double participant_rr_sd_ms = 25.0;
    std::uint64_t seed = 42;
};

struct StudyTruthRow {
    std::string session_id;
    std::string participant_id;
    Task task = Task::rest;
    Light light = Light::light;
    double pupil_mean_mm = 0.0;
    double rr_mean_ms = 0.0;
    double rr_rmssd_ms = 0.0;
    double rr_sdnn_ms = 0.0;
    std::size_t n_beats = 0;
};

struct StudyResult {
    std::filesystem::path manifest_path;
    std::filesystem::path truth_path;
    std::vector<StudyTruthRow> truth;
};

/// Generates one pupil and one ECG session per participant x task x light
/// cell, writing the ingest module's manifest/channel CSV formats plus
/// truth.csv. Fully deterministic given the config seed.
StudyResult synth_study(const StudyConfig& config, const std::filesystem::path& out_dir);

/// RR plan for one session; exposed so tests can feed the exact plan to the
/// HRV oracle chain.
std::vector<double> make_rr_plan(const TaskEffects& effects, double participant_offset_ms,
                                 double session_s, Rng& rng);

} // namespace calm
