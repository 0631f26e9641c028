#pragma once

#include <filesystem>

#ifndef EVACSIM_DATA_DIR
#error "EVACSIM_DATA_DIR must be defined by the build"
#endif

namespace evacsim::testing {

inline std::filesystem::path data_path(const char* name) { return std::filesystem::path(EVACSIM_DATA_DIR) / name; }

}  // namespace evacsim::testing
