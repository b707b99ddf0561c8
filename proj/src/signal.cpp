#include "calm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "calm/error.hpp"

namespace calm {

namespace {

constexpr double kPi = std::numbers::pi;

enum class FilterKind { lowpass, highpass };

FilterCoefficients design_butterworth(FilterKind kind, int order, double cutoff_hz, double rate_hz) {
    if (order < 1) {
        throw DesignError("filter order must be >= 1");
    }
    if (!(cutoff_hz > 0.0) || !(cutoff_hz < rate_hz / 2.0)) {
        throw DesignError("cutoff must lie in (0, rate/2); got cutoff=" + std::to_string(cutoff_hz) +
                          " Hz at rate " + std::to_string(rate_hz) + " Hz");
    }

    // prewarp so the bilinear transform lands the -3.0103 dB point exactly
    // on the requested digital cutoff
    const double warped = 2.0 * rate_hz * std::tan(kPi * cutoff_hz / rate_hz);

    FilterCoefficients out;
    out.order = order;

    const auto bilinear = [rate_hz](std::complex<double> s) {
        return (1.0 + s / (2.0 * rate_hz)) / (1.0 - s / (2.0 * rate_hz));
    };

    // unit-cutoff analog Butterworth poles, left half-plane, k paired with
    // its conjugate; odd order leaves one real pole at -1
    for (int k = 0; k < (order + 1) / 2; ++k) {
        const double theta = kPi / 2.0 + kPi * (2.0 * k + 1.0) / (2.0 * order);
        std::complex<double> pole(std::cos(theta), std::sin(theta));
        if (kind == FilterKind::highpass) {
            pole = 1.0 / pole; // analog LP -> HP: s -> 1/s at unit cutoff
        }
        const std::complex<double> zp = bilinear(pole * warped);

        BiquadSection sec;
        const bool real_pole = (order % 2 == 1) && (k == (order - 1) / 2);
        if (real_pole) {
            sec.a1 = -zp.real();
            sec.a2 = 0.0;
            if (kind == FilterKind::lowpass) {
                const double g = (1.0 + sec.a1) / 2.0;
                sec.b0 = g;
                sec.b1 = g;
                sec.b2 = 0.0;
            } else {
                const double g = (1.0 - sec.a1) / 2.0;
                sec.b0 = g;
                sec.b1 = -g;
                sec.b2 = 0.0;
            }
        } else {
            sec.a1 = -2.0 * zp.real();
            sec.a2 = std::norm(zp);
            if (kind == FilterKind::lowpass) {
                const double g = (1.0 + sec.a1 + sec.a2) / 4.0;
                sec.b0 = g;
                sec.b1 = 2.0 * g;
                sec.b2 = g;
            } else {
                const double g = (1.0 - sec.a1 + sec.a2) / 4.0;
                sec.b0 = g;
                sec.b1 = -2.0 * g;
                sec.b2 = g;
            }
        }
        out.sections.push_back(sec);
    }

    double dc = 1.0;
    for (const auto& s : out.sections) {
        dc *= (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    }
    out.dc_gain = dc;
    return out;
}

// Applies one section in place (transposed direct form II) with the state
// initialized to its constant-input steady state for the buffer's first
// sample, which suppresses start-up transients.
void apply_section(const BiquadSection& s, std::vector<double>& x) {
    const double denom = 1.0 + s.a1 + s.a2;
    const double g = (s.b0 + s.b1 + s.b2) / denom;
    const double x0 = x.front();
    double z2 = (s.b2 - s.a2 * g) * x0;
    double z1 = (s.b1 - s.a1 * g) * x0 + z2;
    for (double& v : x) {
        const double in = v;
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
    }
}

void apply_cascade(const FilterCoefficients& coeffs, std::vector<double>& x) {
    for (const auto& s : coeffs.sections) {
        apply_section(s, x);
    }
}

} // namespace

std::complex<double> FilterCoefficients::response(double freq_hz, double rate_hz) const {
    const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -2.0 * kPi * freq_hz / rate_hz));
    std::complex<double> h(1.0, 0.0);
    for (const auto& s : sections) {
        h *= (s.b0 + zinv * (s.b1 + zinv * s.b2)) / (1.0 + zinv * (s.a1 + zinv * s.a2));
    }
    return h;
}

double FilterCoefficients::magnitude_db(double freq_hz, double rate_hz) const {
    return 20.0 * std::log10(std::abs(response(freq_hz, rate_hz)));
}

IrregularSeries clip_range(const IrregularSeries& series, double lo, double hi) {
    if (!(lo < hi)) {
        throw ContractError("clip_range requires lo < hi");
    }
    IrregularSeries out;
    out.t_s.reserve(series.size());
    out.values.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double v = series.values[i];
        if (v >= lo && v <= hi) { // NaN (missing) fails both comparisons
            out.t_s.push_back(series.t_s[i]);
            out.values.push_back(v);
        }
    }
    if (out.empty()) {
        throw DegenerateSignalError("no samples inside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return out;
}

ResampleResult resample_uniform(const IrregularSeries& series, double rate_hz, double max_gap_s) {
    if (!(rate_hz > 0.0)) {
        throw ContractError("resample rate must be positive");
    }
    // non-finite values are absent measurements; they contribute gaps only
    IrregularSeries clean;
    clean.t_s.reserve(series.size());
    clean.values.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (std::isfinite(series.values[i])) {
            clean.t_s.push_back(series.t_s[i]);
            clean.values.push_back(series.values[i]);
        }
    }
    if (clean.size() < 2) {
        throw DegenerateSignalError("resample needs at least 2 finite samples, got " +
                                    std::to_string(clean.size()));
    }

    ResampleResult res;
    for (std::size_t i = 0; i + 1 < clean.size(); ++i) {
        if (clean.t_s[i + 1] - clean.t_s[i] > max_gap_s) {
            res.gaps.gaps.push_back(GapInterval{clean.t_s[i], clean.t_s[i + 1]});
        }
    }

    const double t0 = clean.t_s.front();
    const double t_end = clean.t_s.back();
    const auto n = static_cast<std::size_t>(std::floor((t_end - t0) * rate_hz + 1e-9)) + 1;

    res.signal.rate_hz = rate_hz;
    res.signal.start_s = t0;
    res.signal.values.resize(n);
    std::size_t j = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = t0 + static_cast<double>(k) / rate_hz;
        while (j + 2 < clean.size() && clean.t_s[j + 1] <= t) {
            ++j;
        }
        const double dt = clean.t_s[j + 1] - clean.t_s[j];
        double alpha = (t - clean.t_s[j]) / dt;
        alpha = std::clamp(alpha, 0.0, 1.0);
        res.signal.values[k] = clean.values[j] + alpha * (clean.values[j + 1] - clean.values[j]);
    }
    return res;
}

FilterCoefficients design_butterworth_lowpass(int order, double cutoff_hz, double rate_hz) {
    return design_butterworth(FilterKind::lowpass, order, cutoff_hz, rate_hz);
}

FilterCoefficients design_butterworth_highpass(int order, double cutoff_hz, double rate_hz) {
    return design_butterworth(FilterKind::highpass, order, cutoff_hz, rate_hz);
}

SampledSignal filter_zero_phase(const SampledSignal& signal, const FilterCoefficients& coeffs) {
    const std::size_t pad = 3 * static_cast<std::size_t>(coeffs.order);
    if (signal.size() <= pad) {
        throw DegenerateSignalError("signal too short for zero-phase filtering: " +
                                    std::to_string(signal.size()) + " samples, need > " + std::to_string(pad));
    }
    const auto& x = signal.values;
    const std::size_t n = x.size();

    // odd reflection about the end points keeps value and slope continuous
    std::vector<double> buf;
    buf.reserve(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) {
        buf.push_back(2.0 * x.front() - x[pad - i]);
    }
    buf.insert(buf.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < pad; ++i) {
        buf.push_back(2.0 * x.back() - x[n - 2 - i]);
    }

    apply_cascade(coeffs, buf);
    std::reverse(buf.begin(), buf.end());
    apply_cascade(coeffs, buf);
    std::reverse(buf.begin(), buf.end());

    SampledSignal out;
    out.rate_hz = signal.rate_hz;
    out.start_s = signal.start_s;
    out.values.assign(buf.begin() + static_cast<std::ptrdiff_t>(pad),
                      buf.begin() + static_cast<std::ptrdiff_t>(pad + n));
    return out;
}

std::size_t window_count(double duration_s, const WindowSpec& spec) {
    if (!(spec.step_s > 0.0) || !(spec.step_s <= spec.length_s)) {
        throw ContractError("window spec requires 0 < step <= length");
    }
    if (duration_s + 1e-9 < spec.length_s) {
        return 0;
    }
    return static_cast<std::size_t>(std::floor((duration_s - spec.length_s) / spec.step_s + 1e-9)) + 1;
}

std::vector<SignalView> sliding_windows(const SampledSignal& signal, const WindowSpec& spec) {
    const std::size_t count = window_count(signal.duration_s(), spec);
    if (count == 0) {
        throw DegenerateSignalError("signal duration " + std::to_string(signal.duration_s()) +
                                    " s is shorter than one " + std::to_string(spec.length_s) + " s window");
    }
    const auto n_window = static_cast<std::size_t>(std::llround(spec.length_s * signal.rate_hz)) + 1;
    std::vector<SignalView> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k) * spec.step_s * signal.rate_hz));
        if (idx + n_window > signal.size()) {
            break;
        }
        out.emplace_back(signal.rate_hz, signal.time_at(idx),
                         std::span<const double>(signal.values.data() + idx, n_window));
    }
    return out;
}

} // namespace calm
