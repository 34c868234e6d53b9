#pragma once

#include <filesystem>
#include <string>

#ifndef AUF_TEST_SCRATCH
#define AUF_TEST_SCRATCH "."
#endif
#ifndef AUF_FIXTURE_DIR
#define AUF_FIXTURE_DIR "fixtures"
#endif

namespace test_support {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::path(AUF_TEST_SCRATCH) / name;
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(AUF_FIXTURE_DIR) / (name + ".pgm");
}

}  // namespace test_support
