#include <doctest.h>

#include <cmath>
#include <numbers>

#include "calm/error.hpp"
#include "calm/pupil.hpp"
#include "calm/rng.hpp"

using namespace calm;

namespace {

RawChannel constant_trace(double value_mm, double duration_s, double rate_hz = 100.0) {
    RawChannel ch;
    ch.kind = ChannelKind::pupil_diameter_mm;
    const auto n = static_cast<std::size_t>(duration_s * rate_hz) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        ch.timestamps_s.push_back(static_cast<double>(i) / rate_hz);
        ch.values.push_back(value_mm);
    }
    return ch;
}

SampledSignal window_of(std::vector<double> values, double rate_hz) {
    return SampledSignal{rate_hz, 0.0, std::move(values)};
}

std::vector<double> noise_window(Rng& rng, std::size_t n, double sd) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = 3.0 + sd * rng.normal();
    }
    return v;
}

void add_burst(std::vector<double>& v, double rate_hz, double t0, double freq, double amp) {
    const double len = 0.2;
    const auto i0 = static_cast<std::size_t>(t0 * rate_hz);
    const auto i1 = static_cast<std::size_t>((t0 + len) * rate_hz);
    for (std::size_t i = i0; i <= i1 && i < v.size(); ++i) {
        const double t = static_cast<double>(i) / rate_hz - t0;
        v[i] += amp * std::sin(2.0 * std::numbers::pi * freq * t);
    }
}

} // namespace

TEST_SUITE("pupil.preprocess") {
    TEST_CASE("clean constant trace stays constant") {
        const auto trace = preprocess_pupil(constant_trace(3.0, 30.0));
        CHECK(trace.signal.rate_hz == 100.0);
        for (const double v : trace.signal.values) {
            CHECK(v == doctest::Approx(3.0).epsilon(1e-9));
        }
    }

    TEST_CASE("blink artifact below the clip floor is removed before resampling") {
        auto raw = constant_trace(3.0, 30.0);
        raw.values[1500] = 0.5; // blink partial-occlusion artifact
        const auto trace = preprocess_pupil(raw);
        for (const double v : trace.signal.values) {
            CHECK(v > 2.9);
            CHECK(v < 3.1);
        }
    }

    TEST_CASE("180 s raw trace gives 18001 samples at 100 Hz") {
        const auto trace = preprocess_pupil(constant_trace(3.0, 180.0));
        CHECK(trace.signal.size() == 18001);
    }

    TEST_CASE("wrong channel kind is a contract error") {
        auto raw = constant_trace(3.0, 30.0);
        raw.kind = ChannelKind::ecg_mv;
        CHECK_THROWS_AS(preprocess_pupil(raw), ContractError);
    }

    TEST_CASE("all-outlier trace is degenerate") {
        const auto raw = constant_trace(12.0, 30.0); // outside [1.5, 9]
        CHECK_THROWS_AS(preprocess_pupil(raw), DegenerateSignalError);
    }

    TEST_CASE("gap report propagates through preprocessing") {
        RawChannel ch;
        ch.kind = ChannelKind::pupil_diameter_mm;
        for (int i = 0; i <= 3000; ++i) {
            const double t = i / 100.0;
            // carve a 2 s hole from 10 s to 12 s
            if (t > 10.0 && t < 12.0) {
                continue;
            }
            ch.timestamps_s.push_back(t);
            ch.values.push_back(3.0);
        }
        const auto trace = preprocess_pupil(ch);
        CHECK(trace.gaps.overlaps(10.5, 11.0));
        CHECK_FALSE(trace.gaps.overlaps(20.0, 25.0));
    }
}

TEST_SUITE("pupil.basic_features") {
    TEST_CASE("constant 3 mm over a 60 s window") {
        const auto w = window_of(std::vector<double>(6001, 3.0), 100.0);
        const auto f = extract_pupil_basic(SignalView(w));
        CHECK(f.mean_mm == doctest::Approx(3.0));
        CHECK(f.std_mm == doctest::Approx(0.0));
        CHECK(f.auc_mm_s == doctest::Approx(180.0));
        CHECK(f.roc_mm_per_s == doctest::Approx(0.0));
    }

    TEST_CASE("exact line has its slope as rate of change") {
        const auto w = window_of({3.0, 3.1, 3.2}, 1.0);
        const auto f = extract_pupil_basic(SignalView(w));
        CHECK(f.roc_mm_per_s == doctest::Approx(0.1));
    }

    TEST_CASE("ramp 3 to 4 mm over 60 s integrates to 210 mm*s") {
        std::vector<double> v(6001);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = 3.0 + static_cast<double>(i) / 6000.0;
        }
        const auto f = extract_pupil_basic(SignalView(window_of(std::move(v), 100.0)));
        CHECK(f.auc_mm_s == doctest::Approx(210.0));
        CHECK(f.roc_mm_per_s == doctest::Approx(1.0 / 60.0));
    }

    TEST_CASE("time-origin shift leaves every feature unchanged") {
        Rng rng(21);
        auto values = noise_window(rng, 600, 0.2);
        SampledSignal a{100.0, 0.0, values};
        SampledSignal b{100.0, 1234.5, values};
        const auto fa = extract_pupil_basic(SignalView(a));
        const auto fb = extract_pupil_basic(SignalView(b));
        CHECK(fa.mean_mm == fb.mean_mm);
        CHECK(fa.std_mm == fb.std_mm);
        CHECK(fa.auc_mm_s == fb.auc_mm_s);
        CHECK(fa.roc_mm_per_s == fb.roc_mm_per_s);
    }

    TEST_CASE("constant offset shifts mean and auc, fixes std and roc") {
        Rng rng(22);
        auto values = noise_window(rng, 600, 0.2);
        auto shifted = values;
        const double c = 1.25;
        for (double& v : shifted) {
            v += c;
        }
        const double duration = 599.0 / 100.0;
        const auto fa = extract_pupil_basic(SignalView(window_of(std::move(values), 100.0)));
        const auto fb = extract_pupil_basic(SignalView(window_of(std::move(shifted), 100.0)));
        CHECK(fb.mean_mm == doctest::Approx(fa.mean_mm + c).epsilon(1e-12));
        CHECK(fb.auc_mm_s == doctest::Approx(fa.auc_mm_s + c * duration).epsilon(1e-12));
        CHECK(fb.std_mm == doctest::Approx(fa.std_mm).epsilon(1e-12));
        CHECK(fb.roc_mm_per_s == doctest::Approx(fa.roc_mm_per_s).epsilon(1e-9));
    }

    TEST_CASE("reversing a window negates the rate of change") {
        Rng rng(23);
        auto values = noise_window(rng, 600, 0.2);
        auto reversed = values;
        std::reverse(reversed.begin(), reversed.end());
        const auto fa = extract_pupil_basic(SignalView(window_of(std::move(values), 100.0)));
        const auto fb = extract_pupil_basic(SignalView(window_of(std::move(reversed), 100.0)));
        CHECK(fb.roc_mm_per_s == doctest::Approx(-fa.roc_mm_per_s).epsilon(1e-9));
    }

    TEST_CASE("one-sample window is degenerate") {
        const auto w = window_of({3.0}, 100.0);
        CHECK_THROWS_AS(extract_pupil_basic(SignalView(w)), DegenerateSignalError);
    }
}

TEST_SUITE("pupil.ipa") {
    TEST_CASE("constant window has zero activity") {
        const auto w = window_of(std::vector<double>(6001, 3.0), 100.0);
        CHECK(compute_ipa(SignalView(w)) == 0.0);
    }

    TEST_CASE("linear ramp has zero activity") {
        std::vector<double> v(6001);
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = 2.0 + static_cast<double>(i) * 1e-4;
        }
        const auto w = window_of(std::move(v), 100.0);
        CHECK(compute_ipa(SignalView(w)) == 0.0);
    }

    TEST_CASE("injected oscillatory bursts strictly raise the index") {
        Rng rng(31);
        auto plain = noise_window(rng, 6001, 0.02);
        auto bursty = plain;
        for (int k = 0; k < 12; ++k) {
            add_burst(bursty, 100.0, 4.0 + 4.5 * k, 16.0, 0.25);
        }
        const double ipa_plain = compute_ipa(SignalView(window_of(std::move(plain), 100.0)));
        const double ipa_bursty = compute_ipa(SignalView(window_of(std::move(bursty), 100.0)));
        CHECK(ipa_bursty > ipa_plain);
    }

    TEST_CASE("constant offset does not change the index") {
        Rng rng(32);
        auto values = noise_window(rng, 6001, 0.05);
        auto shifted = values;
        for (double& v : shifted) {
            v += 2.0;
        }
        const double a = compute_ipa(SignalView(window_of(std::move(values), 100.0)));
        const double b = compute_ipa(SignalView(window_of(std::move(shifted), 100.0)));
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }

    TEST_CASE("window shorter than 4 filter lengths is degenerate") {
        const auto w = window_of(std::vector<double>(100, 3.0), 100.0);
        CHECK_THROWS_AS(compute_ipa(SignalView(w)), DegenerateSignalError);
    }

    TEST_CASE("db2 wavelet is usable through the config") {
        Rng rng(33);
        IpaConfig cfg;
        cfg.wavelet = Wavelet::db2;
        auto bursty = noise_window(rng, 6001, 0.02);
        for (int k = 0; k < 12; ++k) {
            add_burst(bursty, 100.0, 4.0 + 4.5 * k, 16.0, 0.25);
        }
        CHECK(compute_ipa(SignalView(window_of(std::move(bursty), 100.0)), cfg) > 0.0);
    }
}

TEST_SUITE("pupil.wavelet_taps") {
    TEST_CASE("scaling filters are orthogonal with the right norms") {
        for (const Wavelet w : {Wavelet::sym16, Wavelet::db2}) {
            const auto taps = wavelet_scaling_taps(w);
            double sum = 0.0;
            double norm = 0.0;
            for (const double h : taps) {
                sum += h;
                norm += h * h;
            }
            CHECK(sum == doctest::Approx(std::numbers::sqrt2).epsilon(1e-12));
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
            // double-shift orthogonality
            for (std::size_t shift = 2; shift < taps.size(); shift += 2) {
                double dot = 0.0;
                for (std::size_t i = 0; i + shift < taps.size(); ++i) {
                    dot += taps[i] * taps[i + shift];
                }
                CHECK(std::abs(dot) < 1e-12);
            }
        }
    }

    TEST_CASE("derived high-pass annihilates constants and lines") {
        for (const Wavelet w : {Wavelet::sym16, Wavelet::db2}) {
            const auto taps = wavelet_scaling_taps(w);
            const std::size_t n = taps.size();
            double moment0 = 0.0;
            double moment1 = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double g = (k % 2 == 0 ? 1.0 : -1.0) * taps[n - 1 - k];
                moment0 += g;
                moment1 += g * static_cast<double>(k);
            }
            CHECK(std::abs(moment0) < 1e-10);
            CHECK(std::abs(moment1) < 1e-9);
        }
    }
}
