#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace calm::csv {

/// Shortest decimal representation that round-trips the exact double value.
std::string format_double(double value);

/// Strict full-token parse. Throws ParseError on trailing garbage.
double parse_double(std::string_view token, std::size_t line_no);

long long parse_int(std::string_view token, std::size_t line_no);

/// Splits one CSV line on commas. No quoting support: the toolkit's schemas
/// are plain identifiers and numbers. Whitespace around tokens is trimmed.
std::vector<std::string> split_line(std::string_view line);

std::string_view trim(std::string_view s);

/// One parsed data line plus its 1-based position in the file.
struct Line {
    std::string text;
    std::size_t number = 0;
};

/// Reads a whole file, dropping blank lines and `#` comment lines.
std::vector<Line> read_lines(const std::filesystem::path& path);

/// Writes a file atomically: writes `<path>.tmp` then renames onto `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace calm::csv
