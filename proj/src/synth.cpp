#include "calm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "calm/csv.hpp"
#include "calm/error.hpp"
#include "calm/stats.hpp"

namespace calm {

namespace {

double device_rate(Device d) {
    switch (d) {
    case Device::tobii: return 100.0;
    case Device::polar: return 120.0;
    case Device::biopac: return 1000.0;
    }
    return 0.0;
}

} // namespace

EcgSynthResult synth_ecg(std::span<const double> rr_plan_ms, const EcgSynthConfig& config, Rng& rng) {
    for (const double rr : rr_plan_ms) {
        if (rr < 300.0 || rr > 2000.0) {
            throw ContractError("RR plan values must lie in [300, 2000] ms");
        }
    }
    EcgSynthResult out;
    double t = 0.5; // lead-in so the first QRS is complete
    out.true_beat_times_s.push_back(t);
    for (const double rr : rr_plan_ms) {
        t += rr / 1000.0;
        out.true_beat_times_s.push_back(t);
    }
    const double duration = config.duration_s > 0.0 ? config.duration_s : t + 0.5;
    const auto n = static_cast<std::size_t>(std::llround(duration * config.rate_hz));
    // drop truth beats that fall outside a fixed duration
    while (!out.true_beat_times_s.empty() && out.true_beat_times_s.back() > duration - 0.1) {
        out.true_beat_times_s.pop_back();
    }

    std::vector<double> values(n, config.baseline_mv);
    const double sigma = config.qrs_width_s / 4.0;
    const auto reach = static_cast<long long>(std::ceil(4.0 * sigma * config.rate_hz));
    for (const double beat : out.true_beat_times_s) {
        double amplitude = config.qrs_amplitude_mv;
        if (config.amp_mod_freq_hz > 0.0) {
            amplitude *= 1.0 + config.amp_mod_depth *
                                   std::sin(2.0 * std::numbers::pi * config.amp_mod_freq_hz * beat);
        }
        const auto center = static_cast<long long>(std::llround(beat * config.rate_hz));
        for (long long i = center - reach; i <= center + reach; ++i) {
            if (i < 0 || i >= static_cast<long long>(n)) {
                continue;
            }
            const double dt = static_cast<double>(i) / config.rate_hz - beat;
            values[static_cast<std::size_t>(i)] += amplitude * std::exp(-dt * dt / (2.0 * sigma * sigma));
        }
    }

    if (std::isfinite(config.snr_db)) {
        double power = 0.0;
        for (const double v : values) {
            const double ac = v - config.baseline_mv;
            power += ac * ac;
        }
        power /= static_cast<double>(n);
        const double noise_sd = std::sqrt(power * std::pow(10.0, -config.snr_db / 10.0));
        for (double& v : values) {
            v += noise_sd * rng.normal();
        }
    }

    out.ecg.device = config.device;
    out.ecg.signal = SampledSignal{config.rate_hz, 0.0, std::move(values)};
    return out;
}

PupilSynthResult synth_pupil(const PupilSynthConfig& config, Rng& rng) {
    const double level = config.base_mm + config.cl_delta_mm;
    if (level < 1.5 || level > 9.0) {
        throw ContractError("pupil base + delta must stay within [1.5, 9] mm");
    }
    const auto n = static_cast<std::size_t>(std::llround(config.duration_s * config.rate_hz)) + 1;

    // band-limited background noise: white normal through a low-pass, then
    // rescaled to the requested standard deviation
    std::vector<double> noise(n, 0.0);
    if (config.noise_sd_mm > 0.0) {
        for (double& v : noise) {
            v = rng.normal();
        }
        const auto lp = design_butterworth_lowpass(2, config.noise_bandwidth_hz, config.rate_hz);
        SampledSignal raw{config.rate_hz, 0.0, std::move(noise)};
        noise = filter_zero_phase(raw, lp).values;
        const double sd = stats::sample_std(noise);
        const double gain = sd > 1e-12 ? config.noise_sd_mm / sd : 0.0;
        const double mean = stats::mean(noise);
        for (double& v : noise) {
            v = (v - mean) * gain;
        }
    }

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = level + noise[i];
    }

    // oscillatory bursts at Poisson times
    if (config.hf_activity_mm > 0.0 && config.burst_rate_hz > 0.0) {
        double t = rng.exponential(config.burst_rate_hz);
        while (t < config.duration_s) {
            const double burst_len = rng.uniform(0.15, 0.30);
            const double freq = rng.uniform(10.0, 20.0);
            const double amp = config.hf_activity_mm * rng.uniform(0.5, 1.0);
            const double center = t + burst_len / 2.0;
            const double env_sigma = burst_len / 4.0;
            const auto i0 = static_cast<long long>(std::floor(t * config.rate_hz));
            const auto i1 = static_cast<long long>(std::ceil((t + burst_len) * config.rate_hz));
            for (long long i = std::max(0LL, i0); i <= i1 && i < static_cast<long long>(n); ++i) {
                const double ti = static_cast<double>(i) / config.rate_hz;
                const double env = std::exp(-(ti - center) * (ti - center) / (2.0 * env_sigma * env_sigma));
                values[static_cast<std::size_t>(i)] +=
                    amp * env * std::sin(2.0 * std::numbers::pi * freq * (ti - t));
            }
            t += rng.exponential(config.burst_rate_hz);
        }
    }

    // blinks carve gaps
    PupilSynthResult out;
    std::vector<bool> missing(n, false);
    if (config.blink_rate_hz > 0.0) {
        double t = rng.exponential(config.blink_rate_hz);
        while (t < config.duration_s) {
            const double gap = rng.uniform(0.1, 0.3);
            out.truth.blink_intervals.push_back(GapInterval{t, std::min(t + gap, config.duration_s)});
            const auto i0 = static_cast<long long>(std::ceil(t * config.rate_hz));
            const auto i1 = static_cast<long long>(std::floor((t + gap) * config.rate_hz));
            for (long long i = std::max(0LL, i0); i <= i1 && i < static_cast<long long>(n); ++i) {
                missing[static_cast<std::size_t>(i)] = true;
            }
            ++out.truth.blink_count;
            t += gap + rng.exponential(config.blink_rate_hz);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (missing[i]) {
            continue;
        }
        out.series.t_s.push_back(static_cast<double>(i) / config.rate_hz);
        out.series.values.push_back(values[i]);
    }
    if (out.series.size() < 2) {
        throw DegenerateSignalError("blinks removed nearly every sample");
    }

    out.truth.injected_mean_mm = level;
    out.truth.base_mm = config.base_mm;
    out.truth.cl_delta_mm = config.cl_delta_mm;
    out.truth.hf_activity_mm = config.hf_activity_mm;
    return out;
}

std::vector<double> make_rr_plan(const TaskEffects& effects, double participant_offset_ms,
                                 double session_s, Rng& rng) {
    std::vector<double> plan;
    double t = 0.0;
    const double base = effects.rr_base_ms + participant_offset_ms;
    while (t < session_s) {
        double rr = base +
                    effects.rr_mod_depth_ms *
                        std::sin(2.0 * std::numbers::pi * effects.rr_mod_freq_hz * t) +
                    effects.rr_jitter_ms * rng.normal();
        rr = std::clamp(rr, 320.0, 1980.0);
        plan.push_back(rr);
        t += rr / 1000.0;
    }
    return plan;
}

StudyResult synth_study(const StudyConfig& config, const std::filesystem::path& out_dir) {
    if (config.n_participants < 1) {
        throw ContractError("study needs at least 1 participant");
    }
    std::filesystem::create_directories(out_dir / "channels");

    StudyResult result;
    std::vector<SessionManifest> manifests;

    const std::array<Task, 3> tasks = {Task::rest, Task::cl1, Task::cl2};
    const std::array<Light, 2> lights = {Light::light, Light::dark};

    std::uint64_t session_ordinal = 0;
    for (int p = 0; p < config.n_participants; ++p) {
        char pid[16];
        std::snprintf(pid, sizeof(pid), "P%03d", p + 1);

        Rng participant_rng(derive_seed(config.seed, "participant", static_cast<std::uint64_t>(p)));
        const double pupil_offset = config.participant_pupil_sd_mm * participant_rng.normal();
        const double rr_offset = config.participant_rr_sd_ms * participant_rng.normal();

        for (const Task task : tasks) {
            const auto& effects = config.tasks[static_cast<std::size_t>(task)];
            for (const Light light : lights) {
                const std::string session_id =
                    std::string(pid) + '_' + std::string(to_string(task)) + '_' + std::string(to_string(light));

                // pupil channel
                {
                    Rng rng(derive_seed(config.seed, "pupil", session_ordinal));
                    PupilSynthConfig pc;
                    pc.duration_s = config.session_s;
                    pc.base_mm = (light == Light::light ? config.pupil_base_light_mm
                                                        : config.pupil_base_dark_mm) +
                                 pupil_offset;
                    pc.cl_delta_mm = effects.pupil_delta_mm;
                    pc.hf_activity_mm = effects.hf_activity_mm;
                    pc.blink_rate_hz = config.blink_rate_hz;
                    pc.noise_sd_mm = config.pupil_noise_sd_mm;
                    const auto synth = synth_pupil(pc, rng);

                    // full grid with empty cells over the carved gaps
                    RawChannel channel;
                    channel.kind = ChannelKind::pupil_diameter_mm;
                    const auto n = static_cast<std::size_t>(std::llround(pc.duration_s * pc.rate_hz)) + 1;
                    channel.timestamps_s.resize(n);
                    channel.values.assign(n, std::numeric_limits<double>::quiet_NaN());
                    for (std::size_t i = 0; i < n; ++i) {
                        channel.timestamps_s[i] = static_cast<double>(i) / pc.rate_hz;
                    }
                    for (std::size_t i = 0; i < synth.series.size(); ++i) {
                        const auto idx =
                            static_cast<std::size_t>(std::llround(synth.series.t_s[i] * pc.rate_hz));
                        channel.values[idx] = synth.series.values[i];
                    }
                    const auto file = out_dir / "channels" / (session_id + "_tobii.csv");
                    write_channel_csv(channel, file);

                    SessionManifest m;
                    m.participant_id = pid;
                    m.session_id = session_id;
                    m.device = Device::tobii;
                    m.task = task;
                    m.light = light;
                    m.nominal_rate_hz = pc.rate_hz;
                    m.path = file;
                    manifests.push_back(std::move(m));
                }

                // ECG channel
                {
                    Rng rng(derive_seed(config.seed, "ecg", session_ordinal));
                    const auto plan = make_rr_plan(effects, rr_offset, config.session_s, rng);

                    EcgSynthConfig ec;
                    ec.rate_hz = device_rate(config.ecg_device);
                    ec.device = config.ecg_device;
                    ec.snr_db = config.ecg_snr_db;
                    ec.amp_mod_freq_hz = config.r_amp_mod_freq_hz;
                    ec.amp_mod_depth = config.r_amp_mod_depth;
                    ec.duration_s = config.session_s;
                    const auto synth = synth_ecg(plan, ec, rng);

                    RawChannel channel;
                    channel.kind = ChannelKind::ecg_mv;
                    const auto n = synth.ecg.signal.size();
                    channel.timestamps_s.resize(n);
                    channel.values = synth.ecg.signal.values;
                    for (std::size_t i = 0; i < n; ++i) {
                        channel.timestamps_s[i] = static_cast<double>(i) / ec.rate_hz;
                    }
                    const auto file = out_dir / "channels" /
                                      (session_id + '_' + std::string(to_string(config.ecg_device)) + ".csv");
                    write_channel_csv(channel, file);

                    SessionManifest m;
                    m.participant_id = pid;
                    m.session_id = session_id;
                    m.device = config.ecg_device;
                    m.task = task;
                    m.light = light;
                    m.nominal_rate_hz = ec.rate_hz;
                    m.path = file;
                    manifests.push_back(std::move(m));

                    StudyTruthRow truth;
                    truth.session_id = session_id;
                    truth.participant_id = pid;
                    truth.task = task;
                    truth.light = light;
                    truth.pupil_mean_mm =
                        (light == Light::light ? config.pupil_base_light_mm : config.pupil_base_dark_mm) +
                        pupil_offset + effects.pupil_delta_mm;
                    truth.n_beats = synth.true_beat_times_s.size();
                    truth.rr_mean_ms = stats::mean(plan);
                    truth.rr_sdnn_ms = stats::sample_std(plan);
                    double ss = 0.0;
                    for (std::size_t i = 0; i + 1 < plan.size(); ++i) {
                        const double d = plan[i + 1] - plan[i];
                        ss += d * d;
                    }
                    truth.rr_rmssd_ms = std::sqrt(ss / static_cast<double>(plan.size() - 1));
                    result.truth.push_back(std::move(truth));
                }
                ++session_ordinal;
            }
        }
    }

    result.manifest_path = out_dir / "manifest.csv";
    write_manifest_csv(manifests, result.manifest_path, out_dir);

    std::string truth_csv = "session_id,participant_id,task,light,pupil_mean_mm,rr_mean_ms,rr_rmssd_ms,rr_sdnn_ms,n_beats\n";
    for (const auto& row : result.truth) {
        truth_csv += row.session_id + ',' + row.participant_id + ',' + std::string(to_string(row.task)) +
                     ',' + std::string(to_string(row.light)) + ',' + csv::format_double(row.pupil_mean_mm) +
                     ',' + csv::format_double(row.rr_mean_ms) + ',' + csv::format_double(row.rr_rmssd_ms) +
                     ',' + csv::format_double(row.rr_sdnn_ms) + ',' + std::to_string(row.n_beats) + '\n';
    }
    result.truth_path = out_dir / "truth.csv";
    csv::write_file_atomic(result.truth_path, truth_csv);
    return result;
}

} // namespace calm
