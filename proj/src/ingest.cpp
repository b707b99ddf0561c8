#include "calm/ingest.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "calm/csv.hpp"
#include "calm/error.hpp"

namespace calm {

std::string_view to_string(Device d) {
    switch (d) {
    case Device::tobii: return "tobii";
    case Device::biopac: return "biopac";
    case Device::polar: return "polar";
    }
    return "?";
}

std::string_view to_string(Task t) {
    switch (t) {
    case Task::rest: return "rest";
    case Task::cl1: return "cl1";
    case Task::cl2: return "cl2";
    }
    return "?";
}

std::string_view to_string(Light l) {
    return l == Light::light ? "light" : "dark";
}

Device device_from_string(std::string_view s, std::size_t line_no) {
    if (s == "tobii") return Device::tobii;
    if (s == "biopac") return Device::biopac;
    if (s == "polar") return Device::polar;
    throw ValidationError("line " + std::to_string(line_no) + ": unknown device '" + std::string(s) + "'");
}

Task task_from_string(std::string_view s, std::size_t line_no) {
    if (s == "rest") return Task::rest;
    if (s == "cl1") return Task::cl1;
    if (s == "cl2") return Task::cl2;
    throw ValidationError("line " + std::to_string(line_no) + ": unknown task '" + std::string(s) + "'");
}

Light light_from_string(std::string_view s, std::size_t line_no) {
    if (s == "light") return Light::light;
    if (s == "dark") return Light::dark;
    throw ValidationError("line " + std::to_string(line_no) + ": unknown light condition '" + std::string(s) + "'");
}

std::size_t RawChannel::missing_count() const {
    std::size_t n = 0;
    for (const double v : values) {
        if (std::isnan(v)) {
            ++n;
        }
    }
    return n;
}

std::vector<SessionManifest> load_manifest(const std::filesystem::path& path) {
    const auto lines = csv::read_lines(path);
    if (lines.empty()) {
        throw DataError("manifest is empty: " + path.string());
    }
    if (lines.front().text != kManifestHeader) {
        throw ParseError("line " + std::to_string(lines.front().number) + ": manifest header must be exactly '" +
                         std::string(kManifestHeader) + "'");
    }
    const auto base = path.parent_path();
    std::vector<SessionManifest> out;
    out.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& ln = lines[i];
        const auto fields = csv::split_line(ln.text);
        if (fields.size() != 7) {
            throw ParseError("line " + std::to_string(ln.number) + ": expected 7 fields, got " +
                             std::to_string(fields.size()));
        }
        SessionManifest m;
        m.participant_id = fields[0];
        m.session_id = fields[1];
        m.device = device_from_string(fields[2], ln.number);
        m.task = task_from_string(fields[3], ln.number);
        m.light = light_from_string(fields[4], ln.number);
        m.nominal_rate_hz = csv::parse_double(fields[5], ln.number);
        if (!(m.nominal_rate_hz > 0.0)) {
            throw ValidationError("line " + std::to_string(ln.number) + ": nominal_rate_hz must be positive");
        }
        if (fields[6].empty()) {
            throw ValidationError("line " + std::to_string(ln.number) + ": empty channel path");
        }
        std::filesystem::path p(fields[6]);
        m.path = p.is_absolute() ? p : base / p;
        if (!std::filesystem::exists(m.path)) {
            throw ValidationError("line " + std::to_string(ln.number) + ": channel file does not exist: " +
                                  m.path.string());
        }
        out.push_back(std::move(m));
    }
    return out;
}

RawChannel load_channel(const SessionManifest& manifest) {
    if (!std::filesystem::exists(manifest.path)) {
        throw DataError("channel file does not exist: " + manifest.path.string());
    }
    const auto lines = csv::read_lines(manifest.path);
    if (lines.empty()) {
        throw DataError("channel file is empty: " + manifest.path.string());
    }
    if (lines.front().text != kChannelHeader) {
        throw ParseError("line " + std::to_string(lines.front().number) + ": channel header must be exactly '" +
                         std::string(kChannelHeader) + "' in " + manifest.path.string());
    }
    RawChannel ch;
    ch.kind = manifest.kind();
    ch.timestamps_s.reserve(lines.size() - 1);
    ch.values.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& ln = lines[i];
        const auto fields = csv::split_line(ln.text);
        if (fields.size() != 2) {
            throw ParseError("line " + std::to_string(ln.number) + ": expected 2 fields, got " +
                             std::to_string(fields.size()) + " in " + manifest.path.string());
        }
        const double t = csv::parse_double(fields[0], ln.number);
        if (!ch.timestamps_s.empty() && !(t > ch.timestamps_s.back())) {
            throw DataError("line " + std::to_string(ln.number) + ": timestamps not strictly ascending in " +
                            manifest.path.string());
        }
        ch.timestamps_s.push_back(t);
        // empty cell = missing measurement (blink, dropped packet)
        if (fields[1].empty()) {
            ch.values.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            ch.values.push_back(csv::parse_double(fields[1], ln.number));
        }
    }
    if (ch.timestamps_s.empty()) {
        throw DataError("channel file has no data rows: " + manifest.path.string());
    }
    return ch;
}

void write_channel_csv(const RawChannel& channel, const std::filesystem::path& path) {
    std::string out;
    out.reserve(channel.size() * 24 + 16);
    out += kChannelHeader;
    out += '\n';
    for (std::size_t i = 0; i < channel.size(); ++i) {
        out += csv::format_double(channel.timestamps_s[i]);
        out += ',';
        if (!std::isnan(channel.values[i])) {
            out += csv::format_double(channel.values[i]);
        }
        out += '\n';
    }
    csv::write_file_atomic(path, out);
}

void write_manifest_csv(std::span<const SessionManifest> manifests, const std::filesystem::path& path,
                        const std::filesystem::path& relative_to) {
    std::string out;
    out += kManifestHeader;
    out += '\n';
    for (const auto& m : manifests) {
        out += m.participant_id;
        out += ',';
        out += m.session_id;
        out += ',';
        out += to_string(m.device);
        out += ',';
        out += to_string(m.task);
        out += ',';
        out += to_string(m.light);
        out += ',';
        out += csv::format_double(m.nominal_rate_hz);
        out += ',';
        out += m.path.lexically_relative(relative_to).generic_string();
        out += '\n';
    }
    csv::write_file_atomic(path, out);
}

} // namespace calm
