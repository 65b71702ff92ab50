// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace nxfp::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kIoFormat = 2;
inline constexpr int kNonFinite = 3;

// Runs one command line in-process. Diagnostics go to `err` as one line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nxfp::cli
