#pragma once

namespace ymap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnknownCommand = 3;
inline constexpr int kExitMissingInput = 4;
inline constexpr int kExitBadInput = 5;

inline constexpr const char* kVersion = "0.1.0";

int run(int argc, char** argv);

}  // namespace ymap::cli
