#include "calm/csv.hpp"

#include <cstdio>
#include <charconv>
#include <fstream>
#include <system_error>

#include "calm/error.hpp"

namespace calm::csv {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view token, std::size_t line_no) {
    token = trim(token);
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last || token.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": not a number: '" + std::string(token) + "'");
    }
    return value;
}

long long parse_int(std::string_view token, std::size_t line_no) {
    token = trim(token);
    long long value = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size() || token.empty()) {
        throw ParseError("line " + std::to_string(line_no) + ": not an integer: '" + std::string(token) + "'");
    }
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.emplace_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

std::vector<Line> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open file: " + path.string());
    }
    std::vector<Line> lines;
    std::string raw;
    std::size_t n = 0;
    while (std::getline(in, raw)) {
        ++n;
        const auto t = trim(raw);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        lines.push_back(Line{std::string(t), n});
    }
    return lines;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write file: " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("short write: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

} // namespace calm::csv
