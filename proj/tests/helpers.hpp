#pragma once

#include <filesystem>
#include <random>
#include <string>

/// Unique scratch directory, removed when the test is done with it.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() / ("mrcm-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};
