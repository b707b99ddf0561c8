#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace calm {

enum class Device { tobii, biopac, polar };
enum class Task { rest, cl1, cl2 };
enum class Light { light, dark };
enum class ChannelKind { pupil_diameter_mm, ecg_mv };

std::string_view to_string(Device d);
std::string_view to_string(Task t);
std::string_view to_string(Light l);
Device device_from_string(std::string_view s, std::size_t line_no);
Task task_from_string(std::string_view s, std::size_t line_no);
Light light_from_string(std::string_view s, std::size_t line_no);

/// One recorded session: a participant performing one task under one light
/// condition on one device, with the channel data in a separate CSV file.
struct SessionManifest {
    std::string participant_id;
    std::string session_id;
    Device device = Device::tobii;
    Task task = Task::rest;
    Light light = Light::light;
    double nominal_rate_hz = 0.0;
    std::filesystem::path path; // resolved relative to the manifest file

    ChannelKind kind() const {
        return device == Device::tobii ? ChannelKind::pupil_diameter_mm : ChannelKind::ecg_mv;
    }
};

/// Raw channel samples. Missing measurements (blinks, dropped packets) are
/// carried as NaN values, never silently removed.
struct RawChannel {
    ChannelKind kind = ChannelKind::pupil_diameter_mm;
    std::vector<double> timestamps_s;
    std::vector<double> values;

    std::size_t size() const { return timestamps_s.size(); }
    std::size_t missing_count() const;
};

/// Expected manifest header, in order.
inline constexpr std::string_view kManifestHeader =
    "participant_id,session_id,device,task,light,nominal_rate_hz,path";

/// Expected channel header, in order.
inline constexpr std::string_view kChannelHeader = "timestamp_s,value";

std::vector<SessionManifest> load_manifest(const std::filesystem::path& path);

RawChannel load_channel(const SessionManifest& manifest);

/// Writers used by the synthetic-study generator and by round-trip tests.
/// Doubles are encoded with shortest round-trip decimals; missing values as
/// empty cells.
void write_channel_csv(const RawChannel& channel, const std::filesystem::path& path);
void write_manifest_csv(std::span<const SessionManifest> manifests, const std::filesystem::path& path,
                        const std::filesystem::path& relative_to);

} // namespace calm
