#include "calm/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "calm/error.hpp"
#include "calm/stats.hpp"

namespace calm {

namespace {

struct Psd {
    std::vector<double> freq_hz;
    std::vector<double> density; // one-sided, per Hz
};

// Welch estimate with Hann windows at 50% overlap. Segment lengths are a few
// hundred samples at the tachogram rate, so a direct DFT is plenty.
Psd welch_psd(std::span<const double> values, double rate_hz, double segment_s) {
    const std::size_t n = values.size();
    auto n_seg = static_cast<std::size_t>(std::llround(segment_s * rate_hz));
    n_seg = std::min(n_seg, n);
    if (n_seg < 8) {
        throw DegenerateSignalError("too few samples for spectral estimation: " + std::to_string(n));
    }
    const std::size_t hop = std::max<std::size_t>(1, n_seg / 2);

    std::vector<double> window(n_seg);
    double u = 0.0;
    for (std::size_t i = 0; i < n_seg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(n_seg - 1)));
        u += window[i] * window[i];
    }

    const std::size_t n_bins = n_seg / 2 + 1;
    Psd out;
    out.freq_hz.resize(n_bins);
    out.density.assign(n_bins, 0.0);
    for (std::size_t k = 0; k < n_bins; ++k) {
        out.freq_hz[k] = static_cast<double>(k) * rate_hz / static_cast<double>(n_seg);
    }

    std::size_t segments = 0;
    for (std::size_t start = 0; start + n_seg <= n; start += hop) {
        ++segments;
        for (std::size_t k = 0; k < n_bins; ++k) {
            double re = 0.0;
            double im = 0.0;
            const double w0 = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_seg);
            for (std::size_t i = 0; i < n_seg; ++i) {
                const double x = values[start + i] * window[i];
                const double phase = w0 * static_cast<double>(i);
                re += x * std::cos(phase);
                im += x * std::sin(phase);
            }
            double p = (re * re + im * im) / (rate_hz * u);
            if (k != 0 && !(n_seg % 2 == 0 && k == n_bins - 1)) {
                p *= 2.0; // one-sided
            }
            out.density[k] += p;
        }
        if (start + n_seg == n) {
            break;
        }
    }
    for (double& d : out.density) {
        d /= static_cast<double>(segments);
    }
    return out;
}

// Trapezoidal integral of the PSD over [lo, hi], with linear interpolation at
// the band edges.
double integrate_band(const Psd& psd, double lo, double hi) {
    const auto& f = psd.freq_hz;
    const auto& p = psd.density;
    if (f.size() < 2 || !(lo < hi)) {
        return 0.0;
    }
    const double f_min = f.front();
    const double f_max = f.back();
    lo = std::max(lo, f_min);
    hi = std::min(hi, f_max);
    if (!(lo < hi)) {
        return 0.0;
    }
    const auto value_at = [&](double freq) {
        const auto it = std::upper_bound(f.begin(), f.end(), freq);
        const std::size_t j = std::min<std::size_t>(
            f.size() - 1, static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - f.begin())));
        const double alpha = (freq - f[j - 1]) / (f[j] - f[j - 1]);
        return p[j - 1] + alpha * (p[j] - p[j - 1]);
    };
    double acc = 0.0;
    double prev_f = lo;
    double prev_v = value_at(lo);
    for (std::size_t j = 0; j < f.size(); ++j) {
        if (f[j] <= lo || f[j] >= hi) {
            continue;
        }
        acc += 0.5 * (prev_v + p[j]) * (f[j] - prev_f);
        prev_f = f[j];
        prev_v = p[j];
    }
    acc += 0.5 * (prev_v + value_at(hi)) * (hi - prev_f);
    return acc;
}

// Interpolates a beat-indexed series onto a uniform grid and removes the mean.
std::vector<double> uniform_detrended(std::span<const double> times, std::span<const double> values,
                                      double rate_hz) {
    IrregularSeries series;
    series.t_s.assign(times.begin(), times.end());
    series.values.assign(values.begin(), values.end());
    auto resampled = resample_uniform(series, rate_hz, std::numeric_limits<double>::infinity());
    auto& v = resampled.signal.values;
    const double m = stats::mean(v);
    for (double& x : v) {
        x -= m;
    }
    return std::move(v);
}

} // namespace

EcgSignal preprocess_ecg(const RawChannel& raw, Device device, double nominal_rate_hz,
                         const EcgConfig& config) {
    if (raw.kind != ChannelKind::ecg_mv) {
        throw ContractError("preprocess_ecg expects an ecg_mv channel");
    }
    if (device == Device::tobii) {
        throw ContractError("tobii is not an ECG device");
    }
    IrregularSeries series{raw.timestamps_s, raw.values};
    if (device == Device::biopac) {
        // the clinical device reports absolute levels; out-of-range samples
        // are electrode artifacts
        series = clip_range(series, config.clip_lo_mv, config.clip_hi_mv);
    }
    auto resampled = resample_uniform(series, nominal_rate_hz, config.max_gap_s);
    if (resampled.signal.duration_s() + 1e-9 < config.min_recording_s) {
        throw DegenerateSignalError("ECG recording shorter than " + std::to_string(config.min_recording_s) +
                                    " s: " + std::to_string(resampled.signal.duration_s()) + " s");
    }

    EcgSignal out;
    out.device = device;
    out.gaps = std::move(resampled.gaps);
    out.signal = std::move(resampled.signal);

    const auto target = static_cast<std::size_t>(std::llround(config.session_s * nominal_rate_hz));
    if (out.signal.values.size() > target) {
        out.signal.values.resize(target);
    } else {
        // short recordings are extended by holding the final level
        out.signal.values.resize(target, out.signal.values.back());
    }
    return out;
}

std::vector<double> detect_r_peaks(const EcgSignal& ecg, const DetectorConfig& config) {
    const auto& sig = ecg.signal;
    const double rate = sig.rate_hz;
    if (sig.duration_s() < 10.0) {
        throw DegenerateSignalError("R-peak detection needs >= 10 s of signal");
    }

    // band-pass as cascaded zero-phase high- and low-pass passes
    const auto hp = design_butterworth_highpass(config.band_order, config.band_lo_hz, rate);
    const auto lp = design_butterworth_lowpass(config.band_order, config.band_hi_hz, rate);
    SampledSignal band = filter_zero_phase(filter_zero_phase(sig, hp), lp);

    const std::size_t n = band.size();
    // centered five-point derivative, then squaring
    std::vector<double> sq(n, 0.0);
    for (std::size_t i = 2; i + 2 < n; ++i) {
        const double d =
            (2.0 * band.values[i + 2] + band.values[i + 1] - band.values[i - 1] - 2.0 * band.values[i - 2]) / 8.0;
        sq[i] = d * d;
    }

    // centered moving-window integration via prefix sums
    const auto half = static_cast<std::size_t>(std::llround(config.integration_ms / 1000.0 * rate / 2.0));
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + sq[i];
    }
    std::vector<double> integ(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i > half ? i - half : 0;
        const std::size_t b = std::min(n, i + half + 1);
        integ[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
    }

    // candidate peaks of the integrated signal
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (integ[i] > integ[i - 1] && integ[i] >= integ[i + 1]) {
            candidates.push_back(i);
        }
    }

    const auto refractory = static_cast<std::size_t>(std::llround(config.refractory_ms / 1000.0 * rate));
    const auto init_span = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(2.0 * rate)));
    double spki = 0.0;
    double npki = 0.0;
    for (std::size_t i = 0; i < init_span; ++i) {
        spki = std::max(spki, integ[i]);
        npki += integ[i];
    }
    npki = 0.5 * npki / static_cast<double>(init_span);
    spki *= 0.5;

    std::vector<std::size_t> accepted;
    std::vector<double> recent_rr; // samples, last 8 accepted intervals
    const auto rr_average = [&]() {
        if (recent_rr.empty()) {
            return 0.0;
        }
        double s = 0.0;
        for (const double v : recent_rr) {
            s += v;
        }
        return s / static_cast<double>(recent_rr.size());
    };
    const auto push_beat = [&](std::size_t idx) {
        if (!accepted.empty()) {
            if (recent_rr.size() >= 8) {
                recent_rr.erase(recent_rr.begin());
            }
            recent_rr.push_back(static_cast<double>(idx - accepted.back()));
        }
        accepted.push_back(idx);
    };

    for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
        const std::size_t i = candidates[ci];
        const double threshold1 = npki + 0.25 * (spki - npki);
        if (!accepted.empty() && i - accepted.back() < refractory) {
            continue;
        }
        if (integ[i] > threshold1) {
            spki = 0.125 * integ[i] + 0.875 * spki;
            push_beat(i);
        } else {
            npki = 0.125 * integ[i] + 0.875 * npki;
            // search back when a beat is overdue
            const double rr_avg = rr_average();
            if (!accepted.empty() && rr_avg > 0.0 &&
                static_cast<double>(i - accepted.back()) > config.searchback_factor * rr_avg) {
                std::size_t best = 0;
                double best_v = 0.5 * threshold1;
                for (std::size_t cj = 0; cj < ci; ++cj) {
                    const std::size_t j = candidates[cj];
                    if (j <= accepted.back() + refractory || j >= i) {
                        continue;
                    }
                    if (integ[j] > best_v) {
                        best_v = integ[j];
                        best = j;
                    }
                }
                if (best != 0) {
                    spki = 0.25 * integ[best] + 0.75 * spki;
                    push_beat(best);
                    if (i - accepted.back() >= refractory && integ[i] > npki + 0.25 * (spki - npki)) {
                        spki = 0.125 * integ[i] + 0.875 * spki;
                        push_beat(i);
                    }
                }
            }
        }
    }

    // localize on the band-passed signal (the integrated peak can sit half an
    // integration window away from the R wave), then refine on the raw signal
    const auto refine = static_cast<std::size_t>(std::llround(config.refine_ms / 1000.0 * rate));
    std::vector<double> beats;
    beats.reserve(accepted.size());
    std::size_t last_idx = std::numeric_limits<std::size_t>::max();
    for (const std::size_t i : accepted) {
        const std::size_t fa = i > half ? i - half : 0;
        const std::size_t fb = std::min(n, i + half + 1);
        std::size_t fiducial = fa;
        for (std::size_t j = fa; j < fb; ++j) {
            if (std::abs(band.values[j]) > std::abs(band.values[fiducial])) {
                fiducial = j;
            }
        }
        const std::size_t a = fiducial > refine ? fiducial - refine : 0;
        const std::size_t b = std::min(n, fiducial + refine + 1);
        std::size_t arg = a;
        for (std::size_t j = a; j < b; ++j) {
            if (sig.values[j] > sig.values[arg]) {
                arg = j;
            }
        }
        if (last_idx != std::numeric_limits<std::size_t>::max() &&
            (arg == last_idx || arg - last_idx < refractory)) {
            continue;
        }
        last_idx = arg;
        beats.push_back(sig.time_at(arg));
    }

    if (beats.size() < 2) {
        throw DetectionError("fewer than 2 beats detected");
    }
    return beats;
}

RRSeries rr_from_peaks(std::span<const double> beat_times_s, const RrArtifactBounds& bounds) {
    if (beat_times_s.size() < 3) {
        throw DegenerateSignalError("RR construction needs at least 3 beats");
    }
    RRSeries rr;
    for (std::size_t i = 0; i + 1 < beat_times_s.size(); ++i) {
        const double interval = 1000.0 * (beat_times_s[i + 1] - beat_times_s[i]);
        if (interval < bounds.min_ms || interval > bounds.max_ms) {
            ++rr.rejected_count;
            continue;
        }
        rr.beat_times_s.push_back(beat_times_s[i + 1]);
        rr.intervals_ms.push_back(interval);
    }
    if (rr.intervals_ms.size() < 2) {
        throw DegenerateSignalError("fewer than 2 intervals survive artifact rejection");
    }
    return rr;
}

RRSeries slice_rr(const RRSeries& rr, double start_s, double length_s) {
    RRSeries out;
    for (std::size_t i = 0; i < rr.intervals_ms.size(); ++i) {
        if (rr.beat_times_s[i] >= start_s && rr.beat_times_s[i] < start_s + length_s) {
            out.beat_times_s.push_back(rr.beat_times_s[i]);
            out.intervals_ms.push_back(rr.intervals_ms[i]);
        }
    }
    return out;
}

HrvTimeFeatures hrv_time_features(const RRSeries& rr) {
    const auto& iv = rr.intervals_ms;
    if (iv.size() < 3) {
        throw DegenerateSignalError("time-domain HRV needs at least 3 intervals");
    }
    HrvTimeFeatures f;
    f.mean_rr_ms = stats::mean(iv);
    f.median_rr_ms = stats::median(iv);
    f.sdnn_ms = stats::sample_std(iv);

    double sum_sq = 0.0;
    std::size_t over_50 = 0;
    const std::size_t n_diffs = iv.size() - 1;
    for (std::size_t i = 0; i + 1 < iv.size(); ++i) {
        const double d = iv[i + 1] - iv[i];
        sum_sq += d * d;
        if (std::abs(d) > 50.0) {
            ++over_50;
        }
    }
    f.rmssd_ms = std::sqrt(sum_sq / static_cast<double>(n_diffs));
    f.pnn50_pct = 100.0 * static_cast<double>(over_50) / static_cast<double>(n_diffs);
    return f;
}

HrvFreqFeatures hrv_freq_features(const RRSeries& rr, const SpectralConfig& config) {
    if (rr.beat_times_s.size() < 3 ||
        rr.beat_times_s.back() - rr.beat_times_s.front() < 30.0) {
        throw DegenerateSignalError("frequency-domain HRV needs >= 30 s of intervals");
    }
    const auto tachogram = uniform_detrended(rr.beat_times_s, rr.intervals_ms, config.tachogram_rate_hz);
    const auto psd = welch_psd(tachogram, config.tachogram_rate_hz, config.welch_segment_s);

    HrvFreqFeatures f;
    f.hf_power_ms2 = integrate_band(psd, config.hf_lo_hz, config.hf_hi_hz);
    const double lf = integrate_band(psd, config.lf_lo_hz, config.lf_hi_hz);
    if (f.hf_power_ms2 < config.hf_power_epsilon_ms2) {
        f.saturated = true;
        f.lf_hf = config.lf_hf_sentinel;
    } else {
        f.lf_hf = lf / f.hf_power_ms2;
    }
    return f;
}

std::optional<double> respiration_rate(const EcgSignal& ecg, std::span<const double> beat_times_s,
                                       const SpectralConfig& config) {
    if (beat_times_s.size() < 3 || beat_times_s.back() - beat_times_s.front() < 30.0) {
        throw DegenerateSignalError("respiration estimation needs >= 30 s of beats");
    }
    const auto& sig = ecg.signal;
    std::vector<double> amp_t;
    std::vector<double> amp_v;
    amp_t.reserve(beat_times_s.size());
    amp_v.reserve(beat_times_s.size());
    for (const double t : beat_times_s) {
        const auto idx = static_cast<std::ptrdiff_t>(std::llround((t - sig.start_s) * sig.rate_hz));
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(sig.size())) {
            continue;
        }
        amp_t.push_back(t);
        amp_v.push_back(sig.values[static_cast<std::size_t>(idx)]);
    }
    if (amp_t.size() < 3) {
        return std::nullopt;
    }

    const auto series = uniform_detrended(amp_t, amp_v, config.tachogram_rate_hz);
    const auto psd = welch_psd(series, config.tachogram_rate_hz, config.welch_segment_s);

    double peak_f = 0.0;
    double peak_p = 0.0;
    std::vector<double> in_band;
    for (std::size_t i = 0; i < psd.freq_hz.size(); ++i) {
        const double f = psd.freq_hz[i];
        if (f < config.resp_lo_hz || f > config.resp_hi_hz) {
            continue;
        }
        in_band.push_back(psd.density[i]);
        if (psd.density[i] > peak_p) {
            peak_p = psd.density[i];
            peak_f = f;
        }
    }
    if (in_band.size() < 3 || peak_p <= 1e-12) {
        return std::nullopt;
    }
    const double floor = stats::median(in_band);
    if (floor <= 0.0 || peak_p / floor < config.resp_peak_floor_ratio) {
        return std::nullopt;
    }
    return 60.0 * peak_f;
}

} // namespace calm
