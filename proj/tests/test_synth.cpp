#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "calm/error.hpp"
#include "calm/hrv.hpp"
#include "calm/ingest.hpp"
#include "calm/pupil.hpp"
#include "calm/rng.hpp"
#include "calm/stats.hpp"
#include "calm/synth.hpp"
#include "test_support.hpp"

using namespace calm;
using calm::test::TempDir;
using calm::test::read_file;

namespace fs = std::filesystem;

TEST_SUITE("synth.ecg") {
    TEST_CASE("noise-free template maxima sit at the beat times") {
        Rng rng(61);
        std::vector<double> plan(30, 1000.0);
        EcgSynthConfig cfg;
        cfg.rate_hz = 1000.0;
        const auto out = synth_ecg(plan, cfg, rng);
        for (const double beat : out.true_beat_times_s) {
            const auto center = static_cast<std::size_t>(std::llround(beat * cfg.rate_hz));
            for (int off = -40; off <= 40; ++off) {
                if (off == 0) {
                    continue;
                }
                const auto idx = static_cast<std::size_t>(static_cast<long long>(center) + off);
                CHECK(out.ecg.signal.values[center] >= out.ecg.signal.values[idx]);
            }
        }
    }

    TEST_CASE("180 s at 800 ms RR gives 225 beats, give or take one") {
        Rng rng(62);
        std::vector<double> plan(300, 800.0);
        EcgSynthConfig cfg;
        cfg.rate_hz = 500.0;
        cfg.duration_s = 180.0;
        const auto out = synth_ecg(plan, cfg, rng);
        CHECK(out.true_beat_times_s.size() >= 224);
        CHECK(out.true_beat_times_s.size() <= 226);
    }

    TEST_CASE("default template stays inside the biopac clip range") {
        Rng rng(63);
        Rng plan_rng(64);
        TaskEffects effects;
        const auto plan = make_rr_plan(effects, 0.0, 120.0, plan_rng);
        EcgSynthConfig cfg;
        cfg.rate_hz = 1000.0;
        cfg.snr_db = 20.0;
        const auto out = synth_ecg(plan, cfg, rng);
        for (const double v : out.ecg.signal.values) {
            CHECK(v > 300.0);
            CHECK(v < 1000.0);
        }
    }

    TEST_CASE("out-of-range plan values are rejected") {
        Rng rng(65);
        std::vector<double> plan = {800.0, 250.0};
        EcgSynthConfig cfg;
        CHECK_THROWS_AS(synth_ecg(plan, cfg, rng), ContractError);
    }
}

TEST_SUITE("synth.pupil") {
    TEST_CASE("no noise and no blinks gives a constant trace at base plus delta") {
        Rng rng(66);
        PupilSynthConfig cfg;
        cfg.duration_s = 30.0;
        cfg.base_mm = 3.0;
        cfg.cl_delta_mm = 0.4;
        cfg.noise_sd_mm = 0.0;
        cfg.blink_rate_hz = 0.0;
        cfg.hf_activity_mm = 0.0;
        const auto out = synth_pupil(cfg, rng);
        CHECK(out.series.size() == 3001);
        for (const double v : out.series.values) {
            CHECK(v == doctest::Approx(3.4));
        }
        CHECK(out.truth.injected_mean_mm == doctest::Approx(3.4));
        CHECK(out.truth.blink_count == 0);
    }

    TEST_CASE("blink count is near the Poisson expectation") {
        Rng rng(67);
        PupilSynthConfig cfg;
        cfg.duration_s = 180.0;
        cfg.blink_rate_hz = 0.3; // expectation ~54 blinks
        const auto out = synth_pupil(cfg, rng);
        CHECK(out.truth.blink_count > 29);
        CHECK(out.truth.blink_count < 80);
        CHECK(out.truth.blink_intervals.size() == out.truth.blink_count);
        // carved gaps actually remove samples
        CHECK(out.series.size() < 18001);
    }

    TEST_CASE("high-frequency activity raises the pupillary activity index") {
        Rng rng_hi(68);
        Rng rng_lo(68); // same stream, config differs only in activity
        PupilSynthConfig base;
        base.duration_s = 60.0;
        base.blink_rate_hz = 0.0;
        base.noise_sd_mm = 0.02;
        base.hf_activity_mm = 0.0;
        PupilSynthConfig active = base;
        active.hf_activity_mm = 0.3;
        active.burst_rate_hz = 0.5;

        const auto quiet = synth_pupil(base, rng_lo);
        const auto busy = synth_pupil(active, rng_hi);
        const auto quiet_sig = resample_uniform(quiet.series, 100.0, 1.0).signal;
        const auto busy_sig = resample_uniform(busy.series, 100.0, 1.0).signal;
        CHECK(compute_ipa(SignalView(busy_sig)) > compute_ipa(SignalView(quiet_sig)));
    }

    TEST_CASE("level outside the physiological range is rejected") {
        Rng rng(69);
        PupilSynthConfig cfg;
        cfg.base_mm = 8.8;
        cfg.cl_delta_mm = 0.5;
        CHECK_THROWS_AS(synth_pupil(cfg, rng), ContractError);
    }
}

TEST_SUITE("synth.study") {
    TEST_CASE("study layout, determinism and truth propagation") {
        TempDir dir;
        StudyConfig cfg;
        cfg.n_participants = 2;
        cfg.session_s = 70.0;
        cfg.seed = 7;
        const auto result = synth_study(cfg, dir.path / "a");

        // 2 participants x 3 tasks x 2 lights = 12 cells, 24 channel files
        CHECK(result.truth.size() == 12);
        std::size_t file_count = 0;
        for (const auto& entry : fs::directory_iterator(dir.path / "a" / "channels")) {
            (void)entry;
            ++file_count;
        }
        CHECK(file_count == 24);

        const auto manifests = load_manifest(result.manifest_path);
        CHECK(manifests.size() == 24);

        // same seed regenerates byte-identical trees
        synth_study(cfg, dir.path / "b");
        CHECK(read_file(dir.path / "a" / "manifest.csv") == read_file(dir.path / "b" / "manifest.csv"));
        CHECK(read_file(dir.path / "a" / "truth.csv") == read_file(dir.path / "b" / "truth.csv"));
        for (const auto& entry : fs::directory_iterator(dir.path / "a" / "channels")) {
            const auto other = dir.path / "b" / "channels" / entry.path().filename();
            CHECK(read_file(entry.path()) == read_file(other));
        }

        // different seed changes the data
        StudyConfig other_cfg = cfg;
        other_cfg.seed = 8;
        synth_study(other_cfg, dir.path / "c");
        CHECK(read_file(dir.path / "a" / "truth.csv") != read_file(dir.path / "c" / "truth.csv"));
    }

    TEST_CASE("pupil channels carry the injected light shift") {
        TempDir dir;
        StudyConfig cfg;
        cfg.n_participants = 2;
        cfg.session_s = 70.0;
        cfg.seed = 11;
        cfg.pupil_base_light_mm = 3.0;
        cfg.pupil_base_dark_mm = 5.5;
        const auto result = synth_study(cfg, dir.path);

        const auto manifests = load_manifest(result.manifest_path);
        std::map<Light, std::vector<double>> means;
        for (const auto& m : manifests) {
            if (m.device != Device::tobii) {
                continue;
            }
            const auto trace = preprocess_pupil(load_channel(m));
            means[m.light].push_back(stats::mean(trace.signal.values));
        }
        const double light_mean = stats::mean(means[Light::light]);
        const double dark_mean = stats::mean(means[Light::dark]);
        CHECK(dark_mean - light_mean > 2.0);
        CHECK(dark_mean - light_mean < 3.0);
    }

    TEST_CASE("plan statistics in truth.csv satisfy the HRV oracle chain") {
        TempDir dir;
        StudyConfig cfg;
        cfg.n_participants = 1;
        cfg.session_s = 70.0;
        cfg.seed = 13;
        const auto result = synth_study(cfg, dir.path);

        // reconstruct each session's plan deterministically and compare
        std::uint64_t ordinal = 0;
        Rng participant_rng(derive_seed(cfg.seed, "participant", 0));
        participant_rng.normal(); // pupil offset draw
        const double rr_offset = cfg.participant_rr_sd_ms * participant_rng.normal();
        for (const auto& row : result.truth) {
            Rng rng(derive_seed(cfg.seed, "ecg", ordinal));
            const auto plan =
                make_rr_plan(cfg.tasks[static_cast<std::size_t>(row.task)], rr_offset, cfg.session_s, rng);
            RRSeries rr;
            double t = 0.0;
            for (const double v : plan) {
                t += v / 1000.0;
                rr.beat_times_s.push_back(t);
                rr.intervals_ms.push_back(v);
            }
            const auto f = hrv_time_features(rr);
            CHECK(f.mean_rr_ms == doctest::Approx(row.rr_mean_ms).epsilon(1e-9));
            CHECK(f.sdnn_ms == doctest::Approx(row.rr_sdnn_ms).epsilon(1e-9));
            CHECK(f.rmssd_ms == doctest::Approx(row.rr_rmssd_ms).epsilon(1e-9));
            ++ordinal;
        }
    }
}
