#pragma once

#include <string>
#include <vector>

namespace turtle::cli {

inline constexpr const char* kToolName = "turtle";
inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace turtle::cli
