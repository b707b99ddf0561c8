#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "calm/rng.hpp"

namespace calm::test {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::mt19937_64 gen(std::random_device{}());
        path = std::filesystem::temp_directory_path() / ("calm_test_" + std::to_string(gen()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace calm::test
