#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace calm {

/// Timestamped samples with strictly ascending time, before resampling.
struct IrregularSeries {
    std::vector<double> t_s;
    std::vector<double> values;

    std::size_t size() const { return t_s.size(); }
    bool empty() const { return t_s.empty(); }
};

/// Uniformly sampled signal.
struct SampledSignal {
    double rate_hz = 0.0;
    double start_s = 0.0;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    /// Time span from first to last sample.
    double duration_s() const {
        return values.size() < 2 ? 0.0 : static_cast<double>(values.size() - 1) / rate_hz;
    }
    double time_at(std::size_t i) const { return start_s + static_cast<double>(i) / rate_hz; }
};

/// Non-owning window over a SampledSignal, carrying its absolute start time.
struct SignalView {
    double rate_hz = 0.0;
    double start_s = 0.0;
    std::span<const double> values;

    std::size_t size() const { return values.size(); }
    double duration_s() const {
        return values.size() < 2 ? 0.0 : static_cast<double>(values.size() - 1) / rate_hz;
    }

    SignalView() = default;
    SignalView(double rate, double start, std::span<const double> v)
        : rate_hz(rate), start_s(start), values(v) {}
    /// Whole-signal view.
    explicit SignalView(const SampledSignal& s) : rate_hz(s.rate_hz), start_s(s.start_s), values(s.values) {}

    SampledSignal materialize() const {
        return SampledSignal{rate_hz, start_s, {values.begin(), values.end()}};
    }
};

/// An interval between input samples wider than the configured gap limit.
/// Resampling bridges it linearly but flags it so windows can be rejected.
struct GapInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct GapReport {
    std::vector<GapInterval> gaps;

    bool overlaps(double t0, double t1) const {
        for (const auto& g : gaps) {
            if (g.start_s < t1 && t0 < g.end_s) {
                return true;
            }
        }
        return false;
    }
};

struct ResampleResult {
    SampledSignal signal;
    GapReport gaps;
};

/// One second-order IIR section, direct form coefficients
/// (a0 normalized to 1): y = b0 x + b1 x' + b2 x'' - a1 y' - a2 y''.
struct BiquadSection {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;
};

struct FilterCoefficients {
    std::vector<BiquadSection> sections;
    double dc_gain = 1.0;
    int order = 0;

    /// Complex frequency response of the cascade at the given frequency.
    std::complex<double> response(double freq_hz, double rate_hz) const;
    double magnitude_db(double freq_hz, double rate_hz) const;
};

struct WindowSpec {
    double length_s = 60.0;
    double step_s = 50.0;
};

/// Keeps samples with lo <= value <= hi; drops the rest, preserving order.
/// Throws DegenerateSignalError if nothing survives.
IrregularSeries clip_range(const IrregularSeries& series, double lo, double hi);

/// Linear interpolation onto a uniform grid from the first to last timestamp.
/// Input gaps wider than max_gap_s are bridged but flagged in the gap report.
ResampleResult resample_uniform(const IrregularSeries& series, double rate_hz, double max_gap_s = 1.0);

/// Bilinear-transform Butterworth design with frequency prewarping; the
/// response is exactly -3.0103 dB at the cutoff. Cascade of stable biquads
/// normalized to unit DC gain.
FilterCoefficients design_butterworth_lowpass(int order, double cutoff_hz, double rate_hz);

/// High-pass counterpart, used by the R-peak detector's band-pass stage.
FilterCoefficients design_butterworth_highpass(int order, double cutoff_hz, double rate_hz);

/// Forward-backward filtering: zero phase lag, squared magnitude response.
/// Edges handled by odd-reflection padding of 3x order samples.
SampledSignal filter_zero_phase(const SampledSignal& signal, const FilterCoefficients& coeffs);

/// Windows starting at 0, step, 2*step, ... relative to the signal start;
/// count = floor((duration - length) / step) + 1.
std::vector<SignalView> sliding_windows(const SampledSignal& signal, const WindowSpec& spec);

/// Closed-form window count for a signal of the given duration.
std::size_t window_count(double duration_s, const WindowSpec& spec);

} // namespace calm
